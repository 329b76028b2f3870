//! Writes tracker output in the MOT text format and reads it back.
use mot_sort::mot_io::{parse_det_file, synth_sequence, write_results};
use mot_sort::tracker::run_sequence;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seq = synth_sequence(30, 3, 5);
    let out = run_sequence(&seq.frames, Default::default())?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("result.txt");
    write_results(&path, &out)?;
    let back = parse_det_file(&path)?;
    let written: usize = out.iter().map(|f| f.tracks.len()).sum();
    println!("wrote {written} boxes over {} frames; read {} back", out.len(), back.detection_count());
    Ok(())
}
