use rtsched_core::offline::gen::{random_instance, GenParams};
use rtsched_core::offline::{solve_exact, threshold_search};
use std::time::Instant;

fn main() {
    let params = GenParams {
        submit_span: 3000.0,
        ..GenParams::comparison(16)
    };
    let t0 = Instant::now();
    for seed in 0..20u64 {
        let inst = random_instance(&params, seed);
        let budget = Some(std::time::Duration::from_secs(30));
        let out = solve_exact(&inst, budget, 1);
        if out.objective().is_none() {
            let t1 = Instant::now();
            match threshold_search(&inst, 1.2, 2.0, 0.02, budget, 1) {
                Ok((thresh, sched)) => println!(
                    "seed {seed}: loosened to {thresh:.3} obj={:.3} rtj={:.3} ({:.1}s)",
                    sched.mean_bj_sd(&inst),
                    sched.mean_rtj_sd(&inst),
                    t1.elapsed().as_secs_f64()
                ),
                Err(e) => println!("seed {seed}: {e}"),
            }
        }
    }
    println!("total {:.1}s", t0.elapsed().as_secs_f64());
}
