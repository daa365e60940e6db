use std::sync::Arc;
use std::time::Instant;
use sobolev_pinn::loss::{total_loss, Field, LossVariant};
use sobolev_pinn::network::{Architecture, MlpParams};
use sobolev_pinn::problems::ProblemDef;
use sobolev_pinn::tape::Tape;
use sobolev_pinn::train::make_fixed_grid;

fn main() {
    let problem = ProblemDef::by_name("fp-f2").unwrap();
    let arch = Architecture::new(3, &[64, 64]).unwrap();
    let params = Arc::new(MlpParams::init_uniform(&arch, 0));
    let batch = make_fixed_grid(&problem, 31, 31, 31, Some(31), 0).unwrap();
    println!("interior {} initial {} boundary {}", batch.n_interior(), batch.n_initial(), batch.n_boundary());

    // warm the pool
    for _ in 0..2 {
        let mut tape = Tape::new();
        let v = total_loss(&mut tape, &Field::Network(&params), &problem, &batch, LossVariant::Fp1).unwrap();
        let _ = tape.param_gradient(v).unwrap();
    }

    let reps = 5;
    let t = Instant::now();
    let mut node_count = 0;
    for _ in 0..reps {
        let mut tape = Tape::new();
        let _ = total_loss(&mut tape, &Field::Network(&params), &problem, &batch, LossVariant::Fp1).unwrap();
        node_count = tape.len();
    }
    println!("loss build: {:.0} ms ({} nodes)", t.elapsed().as_secs_f64()*1e3/reps as f64, node_count);

    let t = Instant::now();
    for _ in 0..reps {
        let mut tape = Tape::new();
        let v = total_loss(&mut tape, &Field::Network(&params), &problem, &batch, LossVariant::Fp1).unwrap();
        let _ = tape.param_gradient(v).unwrap();
    }
    println!("loss+grad: {:.0} ms", t.elapsed().as_secs_f64()*1e3/reps as f64);

    // jet forward alone via a fresh tape record (measures kernel fwd + entry pushes)
    let request = problem.residual_space_request().unwrap();
    let t = Instant::now();
    for _ in 0..reps {
        let mut tape = Tape::new();
        let _ = tape.record_network_jets(&params, &batch.interior, &request).unwrap();
    }
    println!("interior record (fwd+cache+entries): {:.0} ms", t.elapsed().as_secs_f64()*1e3/reps as f64);
}
