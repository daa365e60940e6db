//! Parameter-gradient correctness: tape adjoints against central finite
//! differences of the losses, and gradient linearity.

mod common;

use std::sync::Arc;

use common::close;
use sobolev_pinn::loss::{total_loss, total_loss_value, Field, LossVariant};
use sobolev_pinn::network::{Architecture, MlpParams};
use sobolev_pinn::problems::ProblemDef;
use sobolev_pinn::tape::Tape;
use sobolev_pinn::train::{make_fixed_grid, TrainConfig};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Central finite difference of the loss with respect to parameter `i`.
fn loss_fd(
    arch: &Architecture,
    flat: &[f64],
    i: usize,
    h: f64,
    problem: &ProblemDef,
    batch: &sobolev_pinn::loss::SampleBatch,
    variant: LossVariant,
) -> f64 {
    let mut up = flat.to_vec();
    up[i] += h;
    let mut dn = flat.to_vec();
    dn[i] -= h;
    let pu = Arc::new(MlpParams::from_flat(arch, &up).unwrap());
    let pd = Arc::new(MlpParams::from_flat(arch, &dn).unwrap());
    let lu = total_loss_value(&Field::Network(&pu), problem, batch, variant).unwrap();
    let ld = total_loss_value(&Field::Network(&pd), problem, batch, variant).unwrap();
    (lu - ld) / (2.0 * h)
}

fn check_variant_gradient(
    problem_name: &str,
    variant: LossVariant,
    batch: &sobolev_pinn::loss::SampleBatch,
    hidden: &[usize],
    n_params_checked: usize,
    tol: f64,
) {
    let problem = ProblemDef::by_name(problem_name).unwrap();
    let arch = Architecture::new(problem.input_dim(), hidden).unwrap();
    let params = Arc::new(MlpParams::init_uniform(&arch, 11));
    let mut tape = Tape::new();
    let loss = total_loss(&mut tape, &Field::Network(&params), &problem, batch, variant).unwrap();
    let grad = tape.param_gradient(loss).unwrap();
    let flat = params.flatten();

    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..n_params_checked {
        let i = rng.random_range(0..flat.len());
        let fd = loss_fd(&arch, &flat, i, 1e-4, &problem, batch, variant);
        assert!(
            close(grad[i], fd, tol),
            "{problem_name}/{variant} param {i}: adjoint {} vs fd {fd}",
            grad[i]
        );
    }
}

#[test]
fn heat_h2_gradient_matches_loss_finite_differences() {
    // Monte-Carlo heat H2 loss on a random net over a 31×31 grid: gradient
    // matches central differences (step 1e-4) on 20 sampled parameters.
    let problem = ProblemDef::by_name("heat").unwrap();
    let batch = make_fixed_grid(&problem, 31, 31, 31, None, 3).unwrap();
    check_variant_gradient("heat", LossVariant::Hb2, &batch, &[12, 12], 20, 1e-4);
}

#[test]
fn every_variant_gradient_matches_finite_differences() {
    // Small batches keep the finite differencing cheap; 8 parameters per
    // variant at relative 1e-4.
    let cases: [(&str, &[LossVariant]); 4] = [
        ("heat", &[LossVariant::Hb0, LossVariant::Hb1]),
        ("burgers", &[LossVariant::Hb2]),
        ("fp-f2", &[LossVariant::Fp0, LossVariant::Fp1]),
        (
            "poisson-d3-k1",
            &[LossVariant::Po0, LossVariant::Po1, LossVariant::Po2],
        ),
    ];
    for (name, variants) in cases {
        let problem = ProblemDef::by_name(name).unwrap();
        let batch = make_fixed_grid(&problem, 4, 5, 3, Some(4), 9).unwrap();
        for &variant in variants {
            check_variant_gradient(name, variant, &batch, &[8, 6], 8, 1e-4);
        }
    }
    // toy variants
    let toy = ProblemDef::by_name("toy-sin-k2").unwrap();
    let batch = make_fixed_grid(&toy, 1, 30, 0, None, 5).unwrap();
    for variant in [LossVariant::ToyL2, LossVariant::ToyH1, LossVariant::ToyH2] {
        check_variant_gradient("toy-sin-k2", variant, &batch, &[8, 6], 8, 1e-4);
    }
}

#[test]
fn gradient_of_sum_is_sum_of_gradients() {
    // Linearity to 1e-12 relative: grad(L_ge + L_ic + L_bc) vs grads of the
    // pieces on separate tapes.
    use sobolev_pinn::loss::{loss_bc, loss_ge, loss_ic};
    let problem = ProblemDef::by_name("heat").unwrap();
    let batch = make_fixed_grid(&problem, 5, 6, 4, None, 21).unwrap();
    let arch = Architecture::new(2, &[10, 8]).unwrap();
    let params = Arc::new(MlpParams::init_uniform(&arch, 77));
    let variant = LossVariant::Hb1;

    let mut tape = Tape::new();
    let field = Field::Network(&params);
    let total = total_loss(&mut tape, &field, &problem, &batch, variant).unwrap();
    let grad_total = tape.param_gradient(total).unwrap();

    let mut parts = vec![0.0; params.n_params()];
    let mut tape_ge = Tape::new();
    let ge = loss_ge(&mut tape_ge, &field, &problem, &batch, &variant.ge_orders()).unwrap();
    for (acc, g) in parts.iter_mut().zip(tape_ge.param_gradient(ge).unwrap()) {
        *acc += g;
    }
    let mut tape_ic = Tape::new();
    let ic = loss_ic(
        &mut tape_ic,
        &field,
        &problem,
        &batch,
        &variant.ic_orders().unwrap(),
    )
    .unwrap();
    for (acc, g) in parts.iter_mut().zip(tape_ic.param_gradient(ic).unwrap()) {
        *acc += g;
    }
    let mut tape_bc = Tape::new();
    let bc = loss_bc(
        &mut tape_bc,
        &field,
        &problem,
        &batch,
        &variant.bc_orders().unwrap(),
    )
    .unwrap();
    for (acc, g) in parts.iter_mut().zip(tape_bc.param_gradient(bc).unwrap()) {
        *acc += g;
    }

    for (i, (a, b)) in grad_total.iter().zip(&parts).enumerate() {
        assert!(
            (a - b).abs() <= 1e-12 * (1.0 + b.abs()),
            "param {i}: {a} vs {b}"
        );
    }
}

#[test]
fn gradients_flow_through_training_configs() {
    // Smoke check that the exact training path (config → loss → gradient)
    // produces finite, mostly nonzero gradients for each family.
    for (problem, loss) in [
        ("heat", LossVariant::Hb2),
        ("fp-f1", LossVariant::Fp1),
        ("poisson-d2-k1", LossVariant::Po2),
        ("toy-relu-k3", LossVariant::ToyH2),
    ] {
        let mut config = TrainConfig::new(problem, loss).unwrap();
        config.hidden = vec![6, 6];
        let def = ProblemDef::by_name(problem).unwrap();
        let batch = make_fixed_grid(&def, 3, 4, 2, Some(3), 1).unwrap();
        let arch = Architecture::new(def.input_dim(), &config.hidden).unwrap();
        let params = Arc::new(MlpParams::init_uniform(&arch, 0));
        let mut tape = Tape::new();
        let var = total_loss(&mut tape, &Field::Network(&params), &def, &batch, loss).unwrap();
        let grad = tape.param_gradient(var).unwrap();
        assert!(grad.iter().all(|g| g.is_finite()));
        let nonzero = grad.iter().filter(|g| **g != 0.0).count();
        assert!(nonzero > grad.len() / 2, "{problem}: {nonzero} nonzero");
    }
}
