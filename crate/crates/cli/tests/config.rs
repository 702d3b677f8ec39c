use proptest::prelude::*;
use urysohn_cli::config::{InitialSetting, SCHEMA};
use urysohn_cli::{parse_config, parse_with, Mode, Overrides, RunConfig, SignChoice};
use urysohn_core::catalog::{manufactured_corpus, random_monotone_problem};
use urysohn_core::extremal::Extrapolation;
use urysohn_core::{Forcing, Kernel, Majorant, Problem};

const MINIMAL: &str = r#"
schema = "urysohn-run/1"
mode = "solve"
grid_n = 10

[problem]
T = 1.0
forcing = { family = "constant", c = 1.0 }
f1 = { family = "zero" }
f2 = { family = "zero" }
"#;

#[test]
fn minimal_config_parses_with_defaults() {
    let cfg = parse_config(MINIMAL).unwrap();
    assert_eq!(cfg.mode, Mode::Solve);
    assert_eq!(cfg.grid_n(), 10);
    let p = cfg.problem.as_ref().unwrap();
    assert_eq!(p.horizon(), 1.0);
    assert_eq!(p.forcing(), &Forcing::constant(1.0));
    assert_eq!(cfg.solver.tol, 1e-10);
    assert_eq!(cfg.extremal.count, 6);
    assert_eq!(cfg.extremal.sign, SignChoice::Both);
}

#[test]
fn integer_literals_are_accepted_for_reals() {
    let text = MINIMAL.replace("c = 1.0", "c = 2").replace("T = 1.0", "T = 1");
    let cfg = parse_config(&text).unwrap();
    assert_eq!(cfg.problem.unwrap().forcing(), &Forcing::constant(2.0));
}

#[test]
fn grid_n_below_two_names_the_field_and_rule() {
    let err = parse_config(&MINIMAL.replace("grid_n = 10", "grid_n = 1")).unwrap_err();
    assert_eq!(err.errors.len(), 1);
    let e = &err.errors[0];
    assert_eq!(e.field, "grid_n");
    assert_eq!(e.line, Some(4));
    assert!(e.message.contains("≥ 2"), "{}", e.message);
}

#[test]
fn decay_ratio_outside_unit_interval_is_rejected() {
    let text = format!("{MINIMAL}\n[extremal]\nrho = 1.2\n");
    let err = parse_config(&text).unwrap_err();
    let e = &err.errors[0];
    assert_eq!(e.field, "extremal.rho");
    assert_eq!(e.line, Some(13));
    assert!(e.message.contains("(0, 1)"));
}

#[test]
fn every_invalid_field_is_reported() {
    let text = format!("{}\n[solver]\ntol = -1.0\n[extremal]\ncount = 1\n", MINIMAL.replace("grid_n = 10", "grid_n = 0"));
    let err = parse_config(&text).unwrap_err();
    let fields: Vec<&str> = err.errors.iter().map(|e| e.field.as_str()).collect();
    assert_eq!(fields, ["grid_n", "solver.tol", "extremal.count"]);
}

#[test]
fn unknown_keys_are_errors_with_a_line() {
    let err = parse_config(&MINIMAL.replace("grid_n = 10", "gridn = 10")).unwrap_err();
    assert_eq!(err.errors[0].line, Some(4));
    assert!(err.errors[0].message.contains("unknown field `gridn`"));

    let err = parse_config(&MINIMAL.replace(r#"{ family = "zero" }"#, r#"{ family = "zero", c = 1 }"#)).unwrap_err();
    assert!(err.errors[0].line.is_some());

    let err = parse_config(&format!("{MINIMAL}\n[solver]\ntoll = 1e-9\n")).unwrap_err();
    assert_eq!(err.errors[0].line, Some(13));
}

#[test]
fn unknown_kernel_family_is_an_error() {
    let err = parse_config(&MINIMAL.replace(r#"f1 = { family = "zero" }"#, r#"f1 = { family = "cubic" }"#)).unwrap_err();
    assert_eq!(err.errors[0].line, Some(9));
}

#[test]
fn problem_level_validation_errors_surface() {
    let err = parse_config(&MINIMAL.replace("c = 1.0", "c = -1.0")).unwrap_err();
    assert!(err.errors[0].message.contains("negative"), "{}", err.errors[0].message);
}

#[test]
fn schema_key_is_required_and_checked() {
    assert!(parse_config(&MINIMAL.replace("schema = \"urysohn-run/1\"\n", "")).is_err());
    let err = parse_config(&MINIMAL.replace("urysohn-run/1", "urysohn-run/0")).unwrap_err();
    assert_eq!(err.errors[0].field, "schema");
}

#[test]
fn problem_is_required_for_problem_modes() {
    let text = format!("schema = \"{SCHEMA}\"\nmode = \"extremal\"\n");
    let err = parse_config(&text).unwrap_err();
    assert_eq!(err.errors[0].field, "problem");
    let corpus = parse_config(&format!("schema = \"{SCHEMA}\"\nmode = \"corpus\"\n")).unwrap();
    assert_eq!(corpus.grid_n(), 400);
}

#[test]
fn overrides_replace_config_values_and_are_validated() {
    let o = Overrides {
        grid_n: Some(33),
        rho: Some(0.25),
        sign: Some(SignChoice::Minus),
        seed: Some(9),
        ..Default::default()
    };
    let cfg = parse_with(MINIMAL, &o).unwrap();
    assert_eq!((cfg.grid_n(), cfg.extremal.rho, cfg.seed), (33, 0.25, 9));
    assert_eq!(cfg.extremal.sign, SignChoice::Minus);

    let bad = Overrides {
        rho: Some(2.0),
        ..Default::default()
    };
    let err = parse_with(MINIMAL, &bad).unwrap_err();
    assert_eq!(err.errors[0].field, "--rho");
    assert_eq!(err.errors[0].line, None);
}

#[test]
fn shifted_and_manufactured_problems_round_trip() {
    let base = Problem::new(
        1.0,
        Forcing::constant(1.0),
        Kernel::perturbed(Kernel::capped_affine_state(0.1, 0.2, 3.0), 0.05),
        Kernel::Zero,
    )
    .unwrap()
    .with_majorants(
        Majorant::Shifted {
            base: Box::new(Majorant::Constant { c: 1.0 }),
            shift: 0.05,
        },
        Majorant::Declared,
    )
    .unwrap();
    let cfg = RunConfig::new(Mode::Extremal, Some(base));
    assert_eq!(parse_config(&cfg.to_toml()).unwrap(), cfg);

    for entry in manufactured_corpus().unwrap() {
        let cfg = RunConfig::new(Mode::Solve, Some(entry.problem));
        assert_eq!(parse_config(&cfg.to_toml()).unwrap(), cfg, "{}", entry.id);
    }
}

fn arb_config() -> impl Strategy<Value = RunConfig> {
    (
        any::<u64>(),
        prop::option::of(2usize..2000),
        prop_oneof![Just(Mode::Solve), Just(Mode::Audit), Just(Mode::Extremal), Just(Mode::Lemma), Just(Mode::Corpus)],
        (1e-14..1e-6f64, 1usize..1000, 0.01..1.0f64, prop::option::of(0.1..3.0f64)),
        (1e-4..1.0f64, 0.01..0.99f64, 2usize..10, any::<bool>(), any::<bool>()),
        (1usize..500, 2usize..200, 0.01..0.5f64, 0.01..0.5f64),
    )
        .prop_map(|(seed, grid_n, mode, solver, extremal, lemma)| {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let problem = random_monotone_problem(&mut rng).unwrap();
            let mut cfg = RunConfig::new(mode, Some(problem));
            cfg.grid_n = grid_n;
            cfg.seed = seed;
            cfg.output_dir = format!("runs/{seed}").into();
            cfg.solver.tol = solver.0;
            cfg.solver.max_iter = solver.1;
            cfg.solver.damping = solver.2;
            cfg.solver.initial = solver.3.map_or(InitialSetting::Forcing, InitialSetting::Constant);
            cfg.extremal.eps0 = extremal.0;
            cfg.extremal.rho = extremal.1;
            cfg.extremal.count = extremal.2;
            cfg.extremal.warm_start = extremal.3;
            cfg.extremal.extrapolation = if extremal.4 { Extrapolation::Linear } else { Extrapolation::Quadratic };
            cfg.lemma.problems = lemma.0;
            cfg.lemma.grid_n = lemma.1;
            cfg.lemma.shrink = lemma.2;
            cfg.lemma.eps = lemma.3;
            cfg
        })
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(64) })]

    #[test]
    fn serialized_configs_reparse_identically(cfg in arb_config()) {
        let text = cfg.to_toml();
        let back = parse_config(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back, cfg);
    }
}
