//! Checks that tie modules together: each compares a simulation from one
//! module with a formula or construction from another.

use approx::assert_abs_diff_eq;
use thermoproc::combinatorics::{delta_bound, delta_d};
use thermoproc::cooling::{
    cool_coherent, cool_incoherent, coherent_closed_form, incoherent_asymptote,
    incoherent_closed_form, verify_round_ordering, IncoherentParams, ProcessClass,
    EXPECTED_ROUND_ORDER,
};
use thermoproc::extraction::{
    epsilon_d_closed, epsilon_etp, epsilon_mtp, epsilon_tp, run_memory_extraction,
    run_sequence_protocol, ExtractionSetup, SequenceClass, Variant,
};
use thermoproc::majorization::{beta_order, min_extraction_error_tp, thermo_majorizes};
use thermoproc::memory::{closed_form_p_d, memory_beta_swap_ground, verify_pair};
use thermoproc::reachable::{qutrit_gibbs, qutrit_mmtp2_vertices, tp_region};
use thermoproc::PopulationVector;

const GAMMAS: [f64; 5] = [0.55, 0.65, 0.75, 0.85, 0.95];

#[test]
fn memory_protocol_matches_closed_form_on_grid() {
    for gamma in GAMMAS {
        for p0 in [0.0, 0.25, 0.5, gamma, 0.9] {
            for d in 1..=12 {
                let sim = memory_beta_swap_ground(d, p0, gamma).unwrap();
                let cf = closed_form_p_d(d, p0, gamma).unwrap();
                assert!((sim - cf).abs() <= 1e-10, "γ={gamma} p0={p0} d={d}");
            }
        }
    }
}

#[test]
fn memory_gap_to_beta_swap_within_bound() {
    for gamma in GAMMAS {
        for p0 in [0.0, 0.25, 0.5, 0.9] {
            for d in 10..=16 {
                let sim = memory_beta_swap_ground(d, p0, gamma).unwrap();
                let exact = 1.0 - p0 * (1.0 - gamma) / gamma;
                let bound = (gamma - p0).abs() * delta_bound(d, gamma);
                assert!((sim - exact).abs() <= bound + 1e-15, "γ={gamma} p0={p0} d={d}");
            }
        }
    }
}

#[test]
fn pair_report_on_three_levels() {
    let r = verify_pair(4, 0.7, 0.2, 0.5).unwrap();
    assert!(r.within_tolerance && r.within_bound);
    assert_abs_diff_eq!(
        r.beta_swap_gap.abs(),
        ((1.0 - 0.7) * 0.2 - 0.7 * 0.5f64).abs() * delta_d(4, 0.7).unwrap(),
        epsilon = 1e-12
    );
}

#[test]
fn coherent_cooling_matches_closed_forms() {
    for gamma in [0.6, 0.75, 0.9] {
        let mut classes = vec![ProcessClass::Tp, ProcessClass::Mtp];
        classes.extend((1..=8).map(ProcessClass::Mmtp));
        for class in classes {
            let run = cool_coherent(class, 50, gamma).unwrap();
            for (k, p) in run.populations.iter().enumerate() {
                let cf = coherent_closed_form(class, k + 1, gamma).unwrap();
                assert!((p - cf).abs() <= 1e-10, "{class} γ={gamma} n={}", k + 1);
            }
        }
    }
}

#[test]
fn incoherent_reference_point() {
    let params = IncoherentParams::new(1.0, 2.0, 1.0, 0.2).unwrap();
    let p_star = incoherent_asymptote(&params);
    assert_abs_diff_eq!(p_star, 0.858149, epsilon = 1e-6);
    for class in [ProcessClass::Tp, ProcessClass::Mtp, ProcessClass::Mmtp(3)] {
        let run = cool_incoherent(class, 50, &params).unwrap();
        assert!((run.populations[49] - p_star).abs() <= 1e-6, "{class}");
        assert!(verify_round_ordering(&run).unwrap());
        for (k, p) in run.populations.iter().enumerate() {
            let cf = incoherent_closed_form(class, k + 1, &params).unwrap();
            assert!((p - cf).abs() <= 1e-10, "{class} n={}", k + 1);
        }
    }
}

#[test]
fn first_incoherent_round_beta_order() {
    let params = IncoherentParams::new(1.0, 2.0, 1.0, 0.2).unwrap();
    let run = cool_incoherent(ProcessClass::Tp, 1, &params).unwrap();
    let order = beta_order(&run.pre_step_states[0], &params.gibbs()).unwrap();
    // The first round has ties (g1 ~ e1, g0 ~ e0) broken by index.
    assert_eq!(order, vec![1, 3, 0, 2]);
    assert_eq!(order, EXPECTED_ROUND_ORDER.to_vec());
}

#[test]
fn extraction_simulations_against_closed_forms() {
    let s = ExtractionSetup::from_products(2f64.ln(), 4f64.ln()).unwrap();
    let (mtp, _) = run_sequence_protocol(SequenceClass::Mtp, &s, Variant::Primary).unwrap();
    let (etp, _) = run_sequence_protocol(SequenceClass::Etp, &s, Variant::Tilde).unwrap();
    assert_abs_diff_eq!(mtp, epsilon_mtp(&s), epsilon = 1e-12);
    assert_abs_diff_eq!(etp, epsilon_etp(&s), epsilon = 1e-12);
    let bisected = min_extraction_error_tp(s.e(), s.w(), s.beta()).unwrap();
    assert_abs_diff_eq!(bisected, epsilon_tp(&s), epsilon = 1e-9);
    let (one, _) = run_memory_extraction(&s, 1).unwrap();
    assert_abs_diff_eq!(one, mtp, epsilon = 1e-12);
}

#[test]
fn memory_extraction_brackets() {
    for k in 0..25 {
        let w = 0.1 + 0.15 * k as f64;
        let s = ExtractionSetup::from_products(1.0, w).unwrap();
        for d in [2, 5, 9] {
            let (eps, trace) = run_memory_extraction(&s, d).unwrap();
            assert!((eps - epsilon_d_closed(&s, d).unwrap()).abs() <= 1e-10);
            assert!(eps >= epsilon_tp(&s) - 1e-12 && eps <= epsilon_mtp(&s) + 1e-12);
            let total: f64 = trace.slot_errors.iter().sum();
            assert_abs_diff_eq!(total, trace.final_error_mass(), epsilon = 1e-12);
        }
    }
}

#[test]
fn qutrit_vertices_in_tp_polytope() {
    for gamma in [0.65, 0.75, 0.85] {
        let gibbs = qutrit_gibbs(gamma).unwrap();
        let ground = PopulationVector::basis(3, 0).unwrap();
        let tp = tp_region(gamma).unwrap();
        for v in qutrit_mmtp2_vertices(gamma).unwrap() {
            assert!(thermo_majorizes(&ground, &v, &gibbs).unwrap());
            assert!(tp.contains(&v, 1e-12));
        }
    }
}
