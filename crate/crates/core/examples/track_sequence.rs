//! Tracks a synthetic sequence and prints the first frames of MOT output.
//!
//! Pass a `det.txt` path to track a real detection file instead.
use mot_sort::mot_io::{parse_det_file, render_results, synth_sequence};
use mot_sort::tracker::run_sequence;
use mot_sort::TrackerConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seq = match std::env::args_os().nth(1) {
        Some(path) => parse_det_file(path.as_ref())?,
        None => synth_sequence(50, 4, 1),
    };
    let out = run_sequence(&seq.frames, TrackerConfig::default())?;
    let text = render_results(&out);
    println!("{}: {} frames, {} detections", seq.name, seq.total_frames, seq.detection_count());
    for line in text.lines().take(12) {
        println!("{line}");
    }
    Ok(())
}
