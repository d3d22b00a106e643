//! Measures the empirical stability margin of the tracked variance-reduced
//! method relative to the certified admissible step bound.

use gtsvrg::gtsvrg::{run, RunConfig};
use gtsvrg::theory;
use gtsvrg::topology::{build_graph, metropolis_weights, uniform_complete, TopologyKind};
use gtsvrg::Problem;

fn main() {
    let cases = [
        ("ring10", 10usize),
        ("complete4", 4usize),
        ("path20", 20usize),
    ];
    for (name, n) in cases {
        let w = match name {
            "ring10" => metropolis_weights(&build_graph(TopologyKind::Ring, n, 0).unwrap()).unwrap(),
            "path20" => metropolis_weights(&build_graph(TopologyKind::Path, n, 0).unwrap()).unwrap(),
            _ => uniform_complete(n).unwrap(),
        };
        let p = Problem::make_quadratic(n, &vec![5; n], 3, 1.0, 100.0, 7).unwrap();
        let c = p.constants();
        let amax = theory::max_step_size(w.sigma(), c.q, c.ell);
        println!("== {name}: sigma={:.6} q={} amax={:.3e} (amax*L={:.3e})", w.sigma(), c.q, amax, amax * c.ell);
        for mult in [1.0, 10.0, 100.0, 1000.0, 2000.0, 4000.0, 8000.0, 16000.0] {
            let mut cfg = RunConfig::new(mult * amax, 3000, 2, 3);
            cfg.record_every = 3000;
            match run(&p, &w, &cfg) {
                Ok(tr) => println!("  mult {mult:>8}: ok, final mean dist {:.3e}", tr.final_row().mean_dist_to_opt),
                Err(e) => println!("  mult {mult:>8}: DIVERGED ({e})"),
            }
        }
    }
}
