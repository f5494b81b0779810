use choicekit_core::behavioral::{fit_model, predict_choice_prob, FitOptions, ModelFamily, ModelParams};
use choicekit_core::fixtures::synthetic_problems;

#[test]
fn prospect_theory_parameters_are_recovered() {
    let truth = ModelParams {
        alpha: 0.88,
        lambda: 2.25,
        gamma: 0.61,
        phi: 1.0,
        ..Default::default()
    };
    let data: Vec<_> = synthetic_problems(500, 77)
        .into_iter()
        .map(|p| {
            let t = predict_choice_prob(ModelFamily::ProspectTheory, &truth, &p);
            (p, t)
        })
        .collect();
    let fit = fit_model(ModelFamily::ProspectTheory, &data, &FitOptions::default()).unwrap();
    assert!(fit.mse < 1e-8);
    for (name, got, want) in [
        ("alpha", fit.params.alpha, 0.88),
        ("lambda", fit.params.lambda, 2.25),
        ("gamma", fit.params.gamma, 0.61),
        ("phi", fit.params.phi, 1.0),
    ] {
        assert!((got - want).abs() <= 0.01, "{name}: {got}");
    }
}

#[test]
fn expected_utility_fit_is_seed_reproducible() {
    let data: Vec<_> = synthetic_problems(150, 3)
        .into_iter()
        .map(|p| {
            let t = choicekit_core::max_ev_prediction(&p).unwrap();
            (p, t)
        })
        .collect();
    let opts = FitOptions {
        restarts: 4,
        seed: 42,
        ..Default::default()
    };
    let a = fit_model(ModelFamily::ExpectedUtility, &data, &opts).unwrap();
    let b = fit_model(ModelFamily::ExpectedUtility, &data, &opts).unwrap();
    assert_eq!(a, b);
    assert!(a.mse < 0.25);
}
