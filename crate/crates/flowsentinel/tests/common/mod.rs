#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use flowsentinel_core::synthetic::gaussian_blobs;

pub const LABELS: [&str; 6] = [
    "Benign",
    "DDoS-TCP",
    "DoS-SYN",
    "MQTT-Malformed_Data",
    "Recon-VulScan",
    "ARP_Spoofing",
];

/// Well separated blobs written as a CSV, one blob per entry of `LABELS`,
/// with feature columns `f0..` and a trailing `label` column.
pub fn write_blob_csv(path: &Path, per_class: usize, features: usize, seed: u64) {
    let ds = gaussian_blobs(per_class, LABELS.len(), features, 5.0, seed).unwrap();
    let mut w = csv::Writer::from_path(path).unwrap();
    let header: Vec<String> = ds
        .feature_names
        .iter()
        .cloned()
        .chain(["label".to_string()])
        .collect();
    w.write_record(&header).unwrap();
    for i in 0..ds.len() {
        let class: usize = ds.raw_labels[i].trim_start_matches("blob").parse().unwrap();
        let row: Vec<String> = ds
            .features
            .row(i)
            .iter()
            .map(|v| v.to_string())
            .chain([LABELS[class].to_string()])
            .collect();
        w.write_record(&row).unwrap();
    }
    w.flush().unwrap();
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_flowsentinel"))
}

pub fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

pub fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}
