use std::path::Path;
use std::process::{Command, Output};

use mot_sort::bench::BenchReport;
use mot_sort::mot_io::{det_path, render_results, synth_sequence};
use mot_sort::tracker::run_sequence;

fn motsort(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_motsort"))
        .args(args)
        .env_remove("MOTSORT_OUT_DIR")
        .output()
        .expect("spawn motsort")
}

/// Writes synthetic sequences in the MOT layout and returns their names.
fn seed_dir(dir: &Path, count: usize) -> Vec<String> {
    (0..count)
        .map(|i| {
            let name = format!("SEQ-{i:02}");
            let seq = synth_sequence(40, 3, i as u64);
            let text: String = seq
                .frames
                .iter()
                .flat_map(|f| {
                    f.dets.iter().map(move |d| {
                        format!(
                            "{},-1,{:.3},{:.3},{:.3},{:.3},0.9,-1,-1,-1\n",
                            f.frame_index,
                            d.x1,
                            d.y1,
                            d.width(),
                            d.height()
                        )
                    })
                })
                .collect();
            let path = det_path(dir, &name);
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(path, text).unwrap();
            name
        })
        .collect()
}

#[test]
fn help_exits_zero() {
    let out = motsort(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("--mode"));
}

#[test]
fn bad_flags_exit_two() {
    assert_eq!(motsort(&["--bogus"]).status.code(), Some(2));
    assert_eq!(motsort(&["--mot-synth", "--cores", "0"]).status.code(), Some(2));
    assert_eq!(motsort(&["--mot-synth", "--iou-threshold", "2"]).status.code(), Some(2));
}

#[test]
fn missing_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let out = motsort(&["--mode", "weak", "--seq-dir", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn track_mode_writes_one_file_per_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let seqs = dir.path().join("data");
    let names = seed_dir(&seqs, 3);
    let out_dir = dir.path().join("out");
    let out = motsort(&[
        "--seq-dir",
        seqs.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut written: Vec<String> = std::fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    written.sort();
    let want: Vec<String> = names.iter().map(|n| format!("{n}.txt")).collect();
    assert_eq!(written, want);

    // Same output as running the library directly on the parsed files.
    let parsed = mot_sort::mot_io::parse_det_file(&det_path(&seqs, &names[0])).unwrap();
    let expect = render_results(&run_sequence(&parsed.frames, Default::default()).unwrap());
    assert_eq!(std::fs::read_to_string(out_dir.join(&want[0])).unwrap(), expect);
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_motsort"))
        .args(["--synthetic", "30,2,2"])
        .env("MOTSORT_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("synth-000.txt").is_file());
    assert!(dir.path().join("synth-001.txt").is_file());
}

#[test]
fn weak_report_is_json() {
    let out = motsort(&["--mode", "weak", "--cores", "2", "--synthetic", "50,3,3", "--seed", "4"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = BenchReport::from_json(&out.stdout).unwrap();
    assert_eq!(r.files, 3);
    assert_eq!(r.frames, 150);
    assert_eq!(r.sequences.len(), 3);
    assert!(r.fps > 0.0);
}

#[test]
fn csv_report_header() {
    let out = motsort(&["--mode", "strong", "--synthetic", "20,2", "--report", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("mode,cores,files,frames,fps,"));
    assert!(lines.next().unwrap().starts_with("strong,1,1,20,"));
    assert!(lines.next().is_none());
}

#[test]
fn sweep_csv_has_a_row_per_core_count() {
    let out = motsort(&[
        "--mode",
        "sweep",
        "--cores",
        "1,2,3,4",
        "--synthetic",
        "30,3,4",
        "--report",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "cores,files,frames,strong,weak,throughput,sequential");
    assert_eq!(lines.len(), 5);
    for (line, cores) in lines[1..].iter().zip(1..) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 7);
        assert_eq!(cols[0], cores.to_string());
        assert_eq!(cols[1], "4");
        assert_eq!(cols[2], "120");
    }
}

#[test]
fn throughput_children_match_in_process_output() {
    let out = motsort(&["--mode", "throughput", "--cores", "2", "--synthetic", "40,3,2", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = BenchReport::from_json(&out.stdout).unwrap();
    assert!(!r.partial);
    assert_eq!(r.child_pids.len(), 2);
    assert!(r.child_pids.iter().all(|&p| p != r.pid));
    let weak = motsort(&["--mode", "weak", "--synthetic", "40,3,2", "--seed", "3"]);
    let w = BenchReport::from_json(&weak.stdout).unwrap();
    let mut a = r.sequences.clone();
    a.sort_by(|x, y| x.name.cmp(&y.name));
    assert_eq!(a, w.sequences);
}
