use gaussrank::classify::verify_conjugate_structure;
use gaussrank::config::{rng_stream, RunConfig};
use gaussrank::frames::DirectionField;
use gaussrank::variety::{random_surface, Variety};

fn main() {
    let cfg = RunConfig::with_seed(0);
    let mut rng = rng_stream(0, 0x50_07);
    let y = random_surface("conjugate_base", 4, 3, &mut rng).unwrap();
    let x = Variety::line_union(&y, DirectionField::Conjugate(0), 0x50_07, &cfg.tol).unwrap();
    let t0 = std::time::Instant::now();
    match verify_conjugate_structure(&x, 0, &cfg) {
        Ok(report) => {
            for (k, comp) in report.components.iter().enumerate() {
                println!(
                    "component {k}: tangency {:.3e}, conjugacy {:.3e}, samples {}",
                    comp.tangency_residual,
                    comp.conjugacy_residual,
                    comp.samples.len()
                );
                // Membership of reconstructed focal points on the input surface.
                for (i, z) in comp.samples.iter().enumerate() {
                    let (_, d) = y.nearest_point(z, 1000 + i as u64, &cfg.tol).unwrap();
                    println!("   sample {i}: distance to Y = {:.3e}", d);
                }
            }
        }
        Err(e) => println!("verifier error: {e}"),
    }
    println!("elapsed {:.1}s", t0.elapsed().as_secs_f64());
}
