use ltl_core::environments::{
    dump_collection, gen_tasks, load_collection, split_collection, EnvironmentSpec,
};
use ltl_core::evaluation::{
    online_model_selection, test_error, EvalOptions, HyperGrid, SelectionOptions, Solver,
};
use ltl_core::meta_learner::{meta_train, GradientMode, MetaConfig};
use ndarray::Array1;

#[test]
fn meta_learned_bias_beats_zero_bias() {
    let spec = EnvironmentSpec::regression_default(11);
    let all = gen_tasks(&spec, 150).unwrap();
    let [train, _, test] = split_collection(&all, 100, 0, 50, 11).unwrap();
    let cfg = MetaConfig::new(0.1, 5.0, GradientMode::ApproxSgd).unwrap();
    let run = meta_train(train.train_sets(), &cfg, false).unwrap();
    let eval = EvalOptions::new(Solver::Sgd);
    let learned = test_error(run.averaged_bias.view(), 0.1, &test, &eval).unwrap();
    let zero = test_error(Array1::zeros(spec.d).view(), 0.1, &test, &eval).unwrap();
    assert!(
        learned.mean < 0.5 * zero.mean,
        "{} vs {}",
        learned.mean,
        zero.mean
    );
    // the averaged bias drifts toward the task mean
    let dist = (&run.averaged_bias - &spec.task_mean())
        .mapv(|v| v * v)
        .sum()
        .sqrt();
    let start = spec.task_mean().mapv(|v| v * v).sum().sqrt();
    assert!(dist < 0.5 * start);
}

#[test]
fn generation_is_prefix_stable() {
    let spec = EnvironmentSpec::classification_default(4);
    let short = gen_tasks(&spec, 5).unwrap();
    let long = gen_tasks(&spec, 12).unwrap();
    assert_eq!(short.splits(), &long.splits()[..5]);
    assert_eq!(
        short.true_weights().unwrap(),
        &long.true_weights().unwrap()[..5]
    );
}

#[test]
fn dumped_collections_reload_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = gen_tasks(&EnvironmentSpec::regression_default(2), 6).unwrap();
    dump_collection(&tasks, dir.path()).unwrap();
    assert_eq!(load_collection(dir.path()).unwrap(), tasks);
}

#[test]
fn selection_over_a_single_cell_reduces_to_fixed_hyperparameters() {
    let all = gen_tasks(&EnvironmentSpec::regression_default(8), 30).unwrap();
    let [train, val, test] = split_collection(&all, 10, 10, 10, 8).unwrap();
    let grid = HyperGrid::new(vec![0.5], vec![2.0]).unwrap();
    let opts = SelectionOptions::new(GradientMode::ApproxSgd, Solver::Sgd);
    let sel = online_model_selection("LTL", &train, &val, &test, &grid, &opts).unwrap();
    let cfg = MetaConfig::new(0.5, 2.0, GradientMode::ApproxSgd).unwrap();
    let run = meta_train(train.train_sets(), &cfg, true).unwrap();
    let prefixes = run.running_averages.unwrap();
    for p in &sel.curve.points {
        let direct = test_error(prefixes[p.t - 1].view(), 0.5, &test, &opts.eval).unwrap();
        assert_eq!(p.mean_error, direct.mean, "t = {}", p.t);
        assert_eq!((p.lambda, p.gamma), (0.5, Some(2.0)));
    }
}
