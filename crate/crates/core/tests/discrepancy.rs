use ndarray::{array, Array1, Array2};
use wann::data::{gen_uniform_shift_1d, LabeledSample};
use wann::nn::{AdamConfig, Architecture, DenseLayer, Mlp, Activation};
use wann::wann::{estimate_y_discrepancy, DiscrepancyBudget, WeightedSample};

/// `max |d(a, b)|` over the clip box for `h'(x) = a·x + b`, by refining a grid
/// around the best point.
fn grid_max(d: impl Fn(f64, f64) -> f64, c: f64) -> f64 {
    let steps = 400;
    let mut best = 0.0f64;
    for i in 0..=steps {
        for j in 0..=steps {
            let a = -c + 2.0 * c * i as f64 / steps as f64;
            let b = -c + 2.0 * c * j as f64 / steps as f64;
            best = best.max(d(a, b).abs());
        }
    }
    best
}

fn fast_budget(epochs: usize) -> DiscrepancyBudget {
    DiscrepancyBudget {
        epochs,
        batch_size: 8,
        seed: 3,
        adam: AdamConfig { lr: 0.02, ..AdamConfig::default() },
    }
}

/// Returns the estimate and the grid maximum for one source and one target point.
fn two_point_case(sx: f64, sy: f64, w: f64, tx: f64, ty: f64, c: f64) -> (f64, f64) {
    {
        let x = array![[sx]];
        let y = array![sy];
        let wv = array![w];
        let target = LabeledSample::new(array![[tx]], array![ty]).unwrap();
        let arch = Architecture::new(1, &[]).with_clip(Some(c));
        let est = estimate_y_discrepancy(
            WeightedSample { x: x.view(), y: y.view(), w: wv.view() },
            &target,
            &arch,
            &fast_budget(400),
            &[],
        )
        .unwrap();
        let oracle = grid_max(
            |a, b| (a * tx + b - ty).powi(2) - w * (a * sx + b - sy).powi(2),
            c,
        );
        assert_eq!(est.value, est.plus.max(est.minus));
        (est.value, oracle)
    }
}

#[test]
fn linear_class_on_two_points_matches_grid_search() {
    // (source x, source y, weight, target x, target y, clip); each has a
    // single basin of attraction for each sign of the gap
    for (sx, sy, w, tx, ty, c) in [
        (0.0, 0.0, 1.0, 1.0, 1.0, 1.0),
        (2.0, -1.0, 2.0, 1.0, 1.0, 0.5),
        (1.0, 0.0, 0.25, 1.0, 2.0, 1.0),
    ] {
        let (est, oracle) = two_point_case(sx, sy, w, tx, ty, c);
        assert!((est - oracle).abs() <= 0.05 * oracle, "estimate {est} vs grid {oracle}");
    }
}

#[test]
fn estimate_never_exceeds_the_class_maximum() {
    // the second case has competing corner maxima; ascent may settle in either
    for (sx, sy, w, tx, ty, c) in [(0.5, 1.0, 0.5, -1.0, 0.3, 0.8), (-1.0, 0.5, 1.5, 2.0, -0.5, 0.7)] {
        let (est, oracle) = two_point_case(sx, sy, w, tx, ty, c);
        assert!(est <= oracle * (1.0 + 1e-9) && est > 0.0, "estimate {est} vs grid {oracle}");
    }
}

#[test]
fn identical_samples_give_zero() {
    let data = gen_uniform_shift_1d(80, 10, 0).unwrap();
    let src = data.train.source();
    let target = src.clone();
    let w = Array1::from_elem(src.len(), 1.0 / src.len() as f64);
    let est = estimate_y_discrepancy(
        WeightedSample { x: src.x.view(), y: src.y.view(), w: w.view() },
        &target,
        &Architecture::new(1, &[10]).with_clip(Some(1.0)),
        &DiscrepancyBudget::default(),
        &[],
    )
    .unwrap();
    assert!(est.value <= 1e-6, "{est:?}");
}

#[test]
fn shifted_samples_give_positive_value_monotone_in_budget() {
    let data = gen_uniform_shift_1d(100, 100, 1).unwrap();
    let (src, tgt) = (data.train.source(), data.train.target());
    let w = Array1::from_elem(src.len(), 1.0 / src.len() as f64);
    let arch = Architecture::new(1, &[10]).with_clip(Some(1.0));
    let mut last = 0.0;
    for epochs in [0, 5, 20, 60] {
        let budget = DiscrepancyBudget { epochs, ..DiscrepancyBudget::default() };
        let est = estimate_y_discrepancy(
            WeightedSample { x: src.x.view(), y: src.y.view(), w: w.view() },
            &tgt,
            &arch,
            &budget,
            &[],
        )
        .unwrap();
        assert!(est.value >= last, "{epochs} epochs: {} < {last}", est.value);
        last = est.value;
    }
    assert!(last > 0.0);
}

#[test]
fn estimate_bounds_the_gap_of_an_extra_start() {
    let data = gen_uniform_shift_1d(60, 40, 2).unwrap();
    let (src, tgt) = (data.train.source(), data.train.target());
    let w = Array1::from_elem(src.len(), 1.0 / src.len() as f64);
    let start = Mlp::from_layers(
        vec![DenseLayer {
            weights: array![[-1.0]],
            biases: array![1.0],
            activation: Activation::Identity,
            dropout_rate: 0.0,
        }],
        Some(1.0),
    )
    .unwrap();
    let gap = start.weighted_mse(tgt.x.view(), tgt.y.view(), Array1::from_elem(tgt.len(), 1.0 / tgt.len() as f64).view()).unwrap()
        - start.weighted_mse(src.x.view(), src.y.view(), w.view()).unwrap();
    let est = estimate_y_discrepancy(
        WeightedSample { x: src.x.view(), y: src.y.view(), w: w.view() },
        &tgt,
        &Architecture::new(1, &[]).with_clip(Some(1.0)),
        &DiscrepancyBudget { epochs: 1, ..DiscrepancyBudget::default() },
        &[start],
    )
    .unwrap();
    assert!(est.value >= gap.abs());
}

#[test]
fn rejects_bad_inputs() {
    let x = Array2::<f64>::zeros((0, 1));
    let y = Array1::<f64>::zeros(0);
    let target = LabeledSample::new(array![[1.0]], array![1.0]).unwrap();
    let arch = Architecture::new(1, &[]);
    let empty = estimate_y_discrepancy(
        WeightedSample { x: x.view(), y: y.view(), w: y.view() },
        &target,
        &arch,
        &DiscrepancyBudget::default(),
        &[],
    );
    assert!(empty.is_err());
    let x = array![[1.0]];
    let neg = array![-1.0];
    let r = estimate_y_discrepancy(
        WeightedSample { x: x.view(), y: x.column(0), w: neg.view() },
        &target,
        &arch,
        &DiscrepancyBudget::default(),
        &[],
    );
    assert!(r.is_err());
}
