use std::sync::Arc;
use std::time::Instant;
use sobolev_pinn::jet::JetSpec;
use sobolev_pinn::loss::{total_loss, Field, LossVariant};
use sobolev_pinn::network::{Architecture, MlpParams};
use sobolev_pinn::problems::ProblemDef;
use sobolev_pinn::tape::Tape;
use sobolev_pinn::train::make_fixed_grid;

fn main() {
    let problem = ProblemDef::by_name("heat").unwrap();
    let arch = Architecture::new(2, &[64, 64]).unwrap();
    let params = Arc::new(MlpParams::init_uniform(&arch, 0));
    let batch = make_fixed_grid(&problem, 31, 31, 31, None, 0).unwrap();
    let request = problem.residual_dt_request().unwrap();
    let spec = JetSpec::closure(&request);
    println!("spec len (HB2 interior): {}", spec.len());

    // 1. bare record_network_jets (forward + cache)
    let reps = 50;
    let t = Instant::now();
    for _ in 0..reps {
        let mut tape = Tape::new();
        let _ = tape
            .record_network_jets(&params, &batch.interior, &request)
            .unwrap();
    }
    println!("forward(+cache) per call: {:.1} ms", t.elapsed().as_secs_f64() * 1e3 / reps as f64);

    // 2. full loss build
    let t = Instant::now();
    for _ in 0..reps {
        let mut tape = Tape::new();
        let _ = total_loss(&mut tape, &Field::Network(&params), &problem, &batch, LossVariant::Hb2).unwrap();
    }
    println!("total_loss per call: {:.1} ms", t.elapsed().as_secs_f64() * 1e3 / reps as f64);

    // 3. loss + gradient
    let t = Instant::now();
    for _ in 0..reps {
        let mut tape = Tape::new();
        let v = total_loss(&mut tape, &Field::Network(&params), &problem, &batch, LossVariant::Hb2).unwrap();
        let _ = tape.param_gradient(v).unwrap();
    }
    println!("loss+grad per call: {:.1} ms", t.elapsed().as_secs_f64() * 1e3 / reps as f64);

    // 4. eval_batch on the test grid
    let pts: Vec<f64> = (0..10201).flat_map(|i| {
        let t = 10.0 * (i / 101) as f64 / 100.0;
        let x = std::f64::consts::PI * (i % 101) as f64 / 100.0;
        [t, x]
    }).collect();
    let t = Instant::now();
    for _ in 0..reps {
        let _ = params.eval_batch(&pts).unwrap();
    }
    println!("test eval per call: {:.1} ms", t.elapsed().as_secs_f64() * 1e3 / reps as f64);
}
