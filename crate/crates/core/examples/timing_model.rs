//! Times the tracker phase by phase on the MOT-sized synthetic suite and
//! fits the per-frame timing model.
use mot_sort::bench::{report, run_sequential, ReportFormat, RunOptions};
use mot_sort::mot_io::mot_sized_suite;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let suite = mot_sized_suite(0);
    let run = run_sequential(&suite, &RunOptions::default())?;
    let r = &run.report;
    let m = &r.timing_model;
    println!("{:.0} FPS over {} frames", r.fps, r.frames);
    println!("T_frame ≈ {:.3}·T_predict + {:.3}·T_assign + {:.3}·T_update + {:.3}·T_output", m.a, m.b, m.c, m.d);
    print!("{}", String::from_utf8(report(r, ReportFormat::Csv))?);
    Ok(())
}
