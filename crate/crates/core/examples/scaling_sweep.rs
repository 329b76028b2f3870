//! Strong and weak scaling in-process, one row per core count.
//!
//! Throughput mode launches `motsort` child processes; run it through the
//! binary: `motsort --mode sweep --mot-synth --cores 1,2,4 --report csv`.
use mot_sort::bench::{run_strong, run_weak, RunOptions};
use mot_sort::mot_io::mot_sized_suite;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let suite = mot_sized_suite(0);
    let opts = RunOptions::default();
    let max = std::thread::available_parallelism().map_or(1, |n| n.get());
    println!("cores,strong,weak");
    let mut p = 1;
    while p <= max.max(2) {
        let strong = run_strong(&suite, p, &opts)?.report;
        let weak = run_weak(&suite, p, &opts)?.report;
        assert_eq!(strong.sequences, weak.sequences);
        println!("{p},{:.0},{:.0}", strong.fps, weak.fps);
        p *= 2;
    }
    Ok(())
}
