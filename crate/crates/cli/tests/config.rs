use polycircuit::trainer::Algo;
use polycircuit_cli::{AgentKind, RunConfig};

#[test]
fn default_config_round_trips_through_toml() {
    let cfg = RunConfig::default();
    let back: RunConfig = toml::from_str(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn partial_config_fills_defaults() {
    let cfg: RunConfig = toml::from_str(
        r#"
        seed = 9
        [train]
        algo = "sac"
        [eval]
        agent = "policy"
        complexities = [2, 3]
        "#,
    )
    .unwrap();
    assert_eq!(cfg.seed, 9);
    assert_eq!(cfg.train.algo, Algo::Sac);
    assert_eq!(cfg.eval.agent, AgentKind::Policy);
    assert_eq!(cfg.eval.episodes, 1000);
    assert_eq!(cfg.board, RunConfig::default().board);
}

#[test]
fn unknown_keys_are_rejected() {
    assert!(toml::from_str::<RunConfig>("sed = 1").is_err());
    assert!(toml::from_str::<RunConfig>("[train]\niteratons = 5").is_err());
    assert!(toml::from_str::<RunConfig>("[mcts]\nsimulation = 5").is_err());
}

#[test]
fn env_is_sized_for_the_largest_target() {
    let mut cfg = RunConfig::default();
    cfg.board.n_vars = 3;
    cfg.board.max_complexity = 4;
    let env = cfg.env_config();
    assert_eq!(env.max_steps, 4 + cfg.env.horizon_slack);
    assert_eq!(env.max_nodes, 3 + 1 + env.max_steps);
}

#[test]
fn validation_catches_bad_settings() {
    let mut cfg = RunConfig::default();
    cfg.validate().unwrap();
    cfg.board.include_constant = false;
    assert!(cfg.validate().is_err());
    let mut cfg = RunConfig::default();
    cfg.workers = 0;
    assert!(cfg.validate().is_err());
    let mut cfg = RunConfig::default();
    cfg.mcts.p_mix = 1.5;
    assert!(cfg.validate().is_err());
}

#[test]
fn shape_hash_tracks_network_shape_only() {
    let a = RunConfig::default();
    let mut b = a.clone();
    b.seed = 77;
    b.train.iterations = 3;
    assert_eq!(a.shape_hash().unwrap(), b.shape_hash().unwrap());
    b.net.hidden += 1;
    assert_ne!(a.shape_hash().unwrap(), b.shape_hash().unwrap());
    let mut c = a.clone();
    c.board.max_complexity += 1;
    assert_ne!(a.shape_hash().unwrap(), c.shape_hash().unwrap());
}
