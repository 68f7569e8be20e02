use multiprop::diagnostics::{summarize, Estimand, DEFAULT_LAGS};
use multiprop::runner::io::{read_chain, write_chain};
use multiprop::runner::{parse_config, run_experiment};
use multiprop::Executor;

fn config(sampler: &str, target: &str) -> String {
    format!(
        "[sampler]\n{sampler}\n\n[target]\n{target}\n\n[run]\nn_iters = 60\nn_chains = 2\nseed = 11\n"
    )
}

fn every_sampler() -> Vec<String> {
    vec![
        config(
            "id = \"rw-multi\"\np = 5\nscale = 0.9",
            "id = \"gaussian\"\ndim = 3",
        ),
        config(
            "id = \"rw-multi\"\np = 3\nvariant = \"naive\"",
            "id = \"mixture-grid\"\nk = 3\nspacing = 3.0",
        ),
        config("id = \"mpcn\"\np = 6\nrho = 0.7", "id = \"toy-inverse\""),
        config(
            "id = \"mpcn\"\np = 1\nrho = 0.9\nclassic = true",
            "id = \"toy-inverse\"",
        ),
        config(
            "id = \"mpcn-resample\"\np = 6\nrho = 0.7\nn_jumps = 3",
            "id = \"quartic\"\ndim = 3",
        ),
        config(
            "id = \"mhmc\"\np = 5\ndelta = 0.2",
            "id = \"quartic\"\ndim = 2",
        ),
        config(
            "id = \"mhmc-resample\"\np = 5\ndelta = 0.2\nn_jumps = 2",
            "id = \"gaussian\"\ndim = 2",
        ),
        config(
            "id = \"simplicial\"\np = 3\nlambda = 1.5",
            "id = \"gaussian\"\ndim = 4",
        ),
    ]
}

#[test]
fn every_sampler_runs_and_is_reproducible() {
    for text in every_sampler() {
        let cfg = parse_config(&text).unwrap();
        let (report, a) = run_experiment(&cfg, &Executor::serial()).unwrap();
        let (_, b) = run_experiment(&cfg, &Executor::new(4).unwrap()).unwrap();
        assert_eq!(a, b, "{}", report.sampler);
        let expected = 60 * cfg.sampler.n_jumps().unwrap_or(1);
        assert_eq!(a[0].num_iterations(), expected, "{}", report.sampler);
        assert!(a[0].samples.iter().flatten().all(|x| x.is_finite()));
    }
}

#[test]
fn chain_files_round_trip_through_diagnostics() {
    let cfg = parse_config(&every_sampler()[2]).unwrap();
    let (_, records) = run_experiment(&cfg, &Executor::serial()).unwrap();
    let mut bytes = Vec::new();
    write_chain(&mut bytes, &records[0], 1).unwrap();
    let back = read_chain(bytes.as_slice()).unwrap();
    assert_eq!(back, records[0]);
    let direct = summarize(&records[0], Estimand::Norm2, &DEFAULT_LAGS).unwrap();
    let via_file = summarize(&back, Estimand::Norm2, &DEFAULT_LAGS).unwrap();
    assert_eq!(
        serde_json::to_string(&direct).unwrap(),
        serde_json::to_string(&via_file).unwrap()
    );
}

#[test]
fn thinning_keeps_iteration_numbers() {
    let cfg = parse_config(&every_sampler()[0]).unwrap();
    let (_, records) = run_experiment(&cfg, &Executor::serial()).unwrap();
    let mut bytes = Vec::new();
    write_chain(&mut bytes, &records[0], 7).unwrap();
    let text = String::from_utf8(bytes).unwrap();
    let iters: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(iters[..4], ["0", "7", "14", "21"]);
}
