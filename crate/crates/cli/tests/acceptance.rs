//! Acceptance suite: one PASS/FAIL line per criterion, with the individual
//! checks listed underneath.
//!
//! Checks are tagged `gate`, `known` or `info`. A failing `gate` makes the
//! process exit non-zero. A `known` check is one whose stated value cannot be
//! reached by a faithful implementation; it still turns its criterion to FAIL
//! but does not fail the run. `info` lines are measurements only.

use std::fmt::Write as _;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use polycircuit::evaluator::{soft_value, Adam, Dims, Mlp, NetConfig, UniformEvaluator};
use polycircuit::families::elementary_symmetric;
use polycircuit::mcts::{temperature, temperature_distribution, ucb_score, Mcts};
use polycircuit::oracle::brute_force_min_complexity;
use polycircuit::trainer::episode::{run_episode, Policy, Streams};
use polycircuit::trainer::gae::compute_gae;
use polycircuit::trainer::losses::{
    finite_difference_check, ppo_loss, sac_loss, supervised_loss, PpoCoeffs, PpoItem,
    RatioBaseline, SacCoeffs, SacItem, SupervisedItem,
};
use polycircuit::trainer::Algo;
use polycircuit::{
    BoardConfig, DedupPolicy, Env, EnvConfig, FieldElement, FieldPolynomial, GameBoard, Layering,
    MctsConfig, Modulus, Monomial, SearchTree,
};
use polycircuit_cli::commands;
use polycircuit_cli::{AgentKind, RunConfig};

type Res<T> = Result<T, Box<dyn std::error::Error>>;

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Gate,
    Known,
    Info,
}

struct Check {
    kind: Kind,
    ok: bool,
    text: String,
}

#[derive(Default)]
struct Checks(Vec<Check>);

impl Checks {
    fn gate(&mut self, ok: bool, text: impl Into<String>) {
        self.0.push(Check {
            kind: Kind::Gate,
            ok,
            text: text.into(),
        });
    }
    fn known(&mut self, ok: bool, text: impl Into<String>) {
        self.0.push(Check {
            kind: Kind::Known,
            ok,
            text: text.into(),
        });
    }
    fn info(&mut self, text: impl Into<String>) {
        self.0.push(Check {
            kind: Kind::Info,
            ok: true,
            text: text.into(),
        });
    }
}

/// True when `x` rounds to `stated` at the number of decimals written in `stated`.
fn matches_stated(x: f64, stated: &str) -> bool {
    let decimals = stated.split('.').nth(1).map_or(0, str::len);
    let want: f64 = stated.parse().unwrap();
    let scale = 10f64.powi(decimals as i32);
    ((x * scale).round() - want * scale).abs() < 0.5
}

// --- criterion 1 -----------------------------------------------------------

fn random_poly(n: usize, m: Modulus, rng: &mut ChaCha8Rng) -> FieldPolynomial {
    let terms: Vec<(Monomial, u64)> = (0..rng.random_range(0..6))
        .map(|_| {
            let e: Vec<u16> = (0..n).map(|_| rng.random_range(0..3)).collect();
            (
                Monomial::from_exponents(&e),
                rng.random_range(0..m.get() as u64),
            )
        })
        .collect();
    FieldPolynomial::from_terms(n, m, terms).unwrap()
}

fn points(n: usize, m: Modulus) -> Vec<Vec<FieldElement>> {
    let p = m.get() as u64;
    (0..p.pow(n as u32))
        .map(|mut k| {
            (0..n)
                .map(|_| {
                    let v = k % p;
                    k /= p;
                    FieldElement::new(v, m)
                })
                .collect()
        })
        .collect()
}

fn table(f: &FieldPolynomial, pts: &[Vec<FieldElement>]) -> Vec<u32> {
    pts.iter().map(|x| f.eval(x).unwrap().value()).collect()
}

/// Polynomial with individual degrees below 5 from a coefficient vector.
fn reduced(n: usize, coeffs: &[u64]) -> FieldPolynomial {
    let m = Modulus::new(5).unwrap();
    let terms = coeffs.iter().enumerate().map(|(k, &c)| {
        let e: Vec<u16> = (0..n)
            .map(|i| ((k / 5usize.pow(i as u32)) % 5) as u16)
            .collect();
        (Monomial::from_exponents(&e), c)
    });
    FieldPolynomial::from_terms(n, m, terms).unwrap()
}

fn e_k_by_subsets(n: usize, k: usize, m: Modulus) -> FieldPolynomial {
    let terms = (0u32..1 << n)
        .filter(|s| s.count_ones() as usize == k)
        .map(|s| {
            let e: Vec<u16> = (0..n).map(|i| ((s >> i) & 1) as u16).collect();
            (Monomial::from_exponents(&e), 1u64)
        });
    FieldPolynomial::from_terms(n, m, terms).unwrap()
}

fn criterion_1(c: &mut Checks) -> Res<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut violations = 0;
    let triples = 1200;
    for _ in 0..triples {
        let n = rng.random_range(1..=3);
        let m = Modulus::new([5, 7, 101][rng.random_range(0..3)])?;
        let (a, b, d) = (
            random_poly(n, m, &mut rng),
            random_poly(n, m, &mut rng),
            random_poly(n, m, &mut rng),
        );
        let zero = FieldPolynomial::zero(n, m);
        let one = FieldPolynomial::one(n, m);
        let neg = FieldPolynomial::constant(n, m, (m.get() - 1) as u64);
        let laws = [
            a.add(&b)? == b.add(&a)?,
            a.mul(&b)? == b.mul(&a)?,
            a.add(&b)?.add(&d)? == a.add(&b.add(&d)?)?,
            a.mul(&b)?.mul(&d)? == a.mul(&b.mul(&d)?)?,
            a.mul(&b.add(&d)?)? == a.mul(&b)?.add(&a.mul(&d)?)?,
            a.add(&zero)? == a,
            a.mul(&one)? == a,
            a.mul(&zero)?.is_zero(),
            a.add(&a.mul(&neg)?)?.is_zero(),
        ];
        violations += laws.iter().filter(|ok| !**ok).count();
    }
    c.gate(violations == 0, format!("ring laws on {triples} random triples, n<=3, p in {{5,7,101}}: {violations} violations"));

    let m = Modulus::new(5)?;
    let pts1 = points(1, m);
    let mut seen = std::collections::HashSet::new();
    for k in 0..3125u64 {
        let coeffs: Vec<u64> = (0..5).map(|i| (k / 5u64.pow(i)) % 5).collect();
        seen.insert(table(&reduced(1, &coeffs), &pts1));
    }
    c.gate(
        seen.len() == 3125,
        format!(
            "n=1: all 3125 reduced polynomials have distinct tables ({})",
            seen.len()
        ),
    );

    let pts2 = points(2, m);
    let mut mismatches = 0;
    let pairs = 2000;
    for i in 0..pairs {
        let a: Vec<u64> = (0..25).map(|_| rng.random_range(0..5)).collect();
        let b: Vec<u64> = if i % 3 == 0 {
            a.clone()
        } else {
            let mut b = a.clone();
            // often a single-coefficient change, sometimes a fresh vector
            if i % 3 == 1 {
                let k = rng.random_range(0..25);
                b[k] = (b[k] + rng.random_range(1..5)) % 5;
            } else {
                b = (0..25).map(|_| rng.random_range(0..5)).collect();
            }
            b
        };
        let (fa, fb) = (reduced(2, &a), reduced(2, &b));
        if (fa == fb) != (table(&fa, &pts2) == table(&fb, &pts2)) {
            mismatches += 1;
        }
    }
    c.gate(mismatches == 0, format!("n=2: canonical equality agrees with evaluation on all 25 points for {pairs} pairs ({mismatches} mismatches)"));

    let x = FieldPolynomial::variable(1, m, 0)?;
    let x5 = (0..4).try_fold(x.clone(), |acc, _| acc.mul(&x))?;
    c.info(format!(
        "x^5 and x share a table on F_5 and differ formally: {}",
        table(&x, &pts1) == table(&x5, &pts1) && x != x5
    ));

    let mut bad = 0;
    for p in [5u32, 7, 101] {
        let m = Modulus::new(p)?;
        for n in 1..=5 {
            for k in 0..=n {
                let e = elementary_symmetric(n, k, m)?;
                if e != e_k_by_subsets(n, k, m) {
                    bad += 1;
                }
                if k >= 1 && n >= 2 {
                    let lift = |f: FieldPolynomial| {
                        FieldPolynomial::from_terms(
                            n,
                            m,
                            f.terms().iter().map(|(mo, c)| {
                                let mut e = mo.exponents().to_vec();
                                e.push(0);
                                (Monomial::from_exponents(&e), *c as u64)
                            }),
                        )
                    };
                    let rhs = lift(elementary_symmetric(n - 1, k, m)?)?.add(
                        &FieldPolynomial::variable(n, m, n - 1)?
                            .mul(&lift(elementary_symmetric(n - 1, k - 1, m)?)?)?,
                    )?;
                    if e != rhs {
                        bad += 1;
                    }
                }
            }
        }
    }
    c.gate(
        bad == 0,
        format!(
            "e_k(n) = e_k(n-1) + x_n e_(k-1)(n-1) and subset expansion for n<=5: {bad} failures"
        ),
    );
    Ok(())
}

// --- criterion 2 -----------------------------------------------------------

fn histogram(board: &GameBoard) -> Vec<usize> {
    board.depth_histogram().values().copied().collect()
}

fn depth_board(
    n: usize,
    p: u32,
    c: usize,
    dedup: DedupPolicy,
    constant: bool,
    cap: usize,
) -> Res<GameBoard> {
    Ok(GameBoard::build(&BoardConfig {
        n_vars: n,
        modulus: p,
        max_complexity: c,
        node_cap: cap,
        dedup,
        layering: Layering::Depth,
        include_constant: constant,
        ..BoardConfig::default()
    })?)
}

fn criterion_2(c: &mut Checks) -> Res<()> {
    let pre = histogram(&depth_board(1, 5, 4, DedupPolicy::Global, false, 20_000)?);
    c.known(
        pre.starts_with(&[1, 2, 9, 96]),
        format!("n=1 p=5 C=4 global dedup layer counts start 1, 2, 9, 96: got {pre:?}"),
    );
    let big = histogram(&depth_board(
        1,
        1_000_003,
        4,
        DedupPolicy::Global,
        false,
        20_000,
    )?);
    c.info(format!(
        "same build at p=1000003: {big:?}, {} nodes",
        big.iter().sum::<usize>()
    ));

    let main = histogram(&depth_board(2, 5, 1, DedupPolicy::Global, true, 20_000)?);
    c.gate(
        main.first() == Some(&3),
        format!("n=2 depth-0 = 3: got {:?}", main.first()),
    );
    let local = histogram(&depth_board(
        2,
        5,
        1,
        DedupPolicy::LayerLocal,
        true,
        20_000,
    )?);
    c.gate(
        local.get(1) == Some(&12),
        format!("n=2 layer-local depth-1 = 12: got {:?}", local.get(1)),
    );

    for dedup in [DedupPolicy::Global, DedupPolicy::LayerLocal] {
        let t = Instant::now();
        let b = depth_board(2, 5, 4, dedup, true, 20_000)?;
        let s = b.stats();
        c.info(format!(
            "n=2 p=5 C=4 depth board, cap 20000, {dedup:?}: {} nodes, {} edges, {:.2}% multi-optimal, truncated={} (target 20000 nodes, 31746 edges, 94.83% multi-optimal), {:.1}s",
            s.nodes,
            s.edges,
            s.multi_optimal_pct,
            s.truncated,
            t.elapsed().as_secs_f64()
        ));
    }
    Ok(())
}

// --- criterion 3 -----------------------------------------------------------

fn gates_board(c: usize) -> Res<GameBoard> {
    Ok(GameBoard::build(&BoardConfig {
        n_vars: 2,
        modulus: 5,
        max_complexity: c,
        node_cap: usize::MAX,
        ..BoardConfig::default()
    })?)
}

fn criterion_3(c: &mut Checks) -> Res<()> {
    let board = gates_board(3)?;
    let m = board.modulus();
    let mut disagree = 0;
    for node in board.nodes() {
        let r = brute_force_min_complexity(&node.polynomial, 2, m, 3)?;
        if r.map(|r| r.complexity) != Some(node.min_depth) {
            disagree += 1;
        }
    }
    c.gate(
        disagree == 0 && !board.truncated(),
        format!(
            "n=2 C=3 board: min_depth equals the brute-force minimum on {} of {} nodes",
            board.len() - disagree,
            board.len()
        ),
    );
    let f = FieldPolynomial::parse("x0^2 + 2*x0*x1 + x1^2", 2, m)?;
    let r = brute_force_min_complexity(&f, 2, m, 4)?.map(|r| r.complexity);
    c.gate(
        r == Some(2),
        format!("x0^2 + 2*x0*x1 + x1^2 has minimal complexity 2: got {r:?}"),
    );
    Ok(())
}

// --- criterion 4 -----------------------------------------------------------

fn criterion_4(c: &mut Checks) -> Res<()> {
    let board = gates_board(2)?;
    let env = Env::new(EnvConfig::for_complexity(2, 5, 2))?;
    let cfg = MctsConfig {
        simulations: 100,
        ..MctsConfig::default()
    };
    let mcts = Mcts {
        env: &env,
        evaluator: &UniformEvaluator,
        config: &cfg,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut conserved, mut masked, mut reused, mut tried) = (true, true, true, 0);
    for &t in board.nodes_at_depth(2).iter().take(20) {
        let mut state = env.reset_from_board(&board, t, &mut rng)?;
        let mut tree = SearchTree::new(state.clone());
        let visits = mcts.search(&mut tree)?;
        conserved &= visits.iter().map(|&v| v as u64).sum::<u64>() == 100;
        let mask = env.action_mask(&state);
        masked &= visits.iter().enumerate().all(|(a, &v)| mask[a] || v == 0);
        let best = (0..visits.len())
            .max_by_key(|&a| (visits[a], std::cmp::Reverse(a)))
            .unwrap();
        tree.advance(&env, best)?;
        env.step(&mut state, best)?;
        if !state.done {
            tried += 1;
            let kept: u64 = tree
                .root_visits(env.num_actions())
                .iter()
                .map(|&v| v as u64)
                .sum();
            let again = mcts.search(&mut tree)?;
            reused &= kept + 1 == visits[best] as u64
                && again.iter().map(|&v| v as u64).sum::<u64>() == kept + 100;
        }
    }
    c.gate(conserved, "root visits sum to the simulation count");
    c.gate(masked, "masked actions are never visited");
    c.gate(
        reused && tried > 0,
        format!("visits carried through tree reuse on {tried} advanced roots"),
    );

    let run = |sims: usize, seed: u64| -> Res<Vec<Vec<usize>>> {
        let cfg = MctsConfig {
            simulations: sims,
            ..MctsConfig::default()
        };
        let mut streams = Streams::new(seed);
        let mut out = Vec::new();
        for &t in board.nodes_at_depth(2).iter().take(10) {
            let state = env.reset_from_board(&board, t, &mut streams.targets)?;
            let policy = Policy {
                evaluator: &UniformEvaluator,
                mcts: Some(&cfg),
                tau: None,
                p_mix: 0.5,
                record: false,
            };
            out.push(run_episode(&env, t, state, &policy, &mut streams)?.actions);
        }
        Ok(out)
    };
    c.gate(
        run(64, 9)? == run(64, 9)?,
        "identical seeds give identical search episodes",
    );

    let cfg = MctsConfig {
        simulations: 512,
        ..MctsConfig::default()
    };
    let targets: Vec<usize> = (1..=2).flat_map(|d| board.nodes_at_depth(d)).collect();
    let mut streams = Streams::new(3);
    let mut solved = 0;
    for &t in &targets {
        let state = env.reset_from_board(&board, t, &mut streams.targets)?;
        let policy = Policy {
            evaluator: &UniformEvaluator,
            mcts: Some(&cfg),
            tau: Some(0.1),
            p_mix: 1.0,
            record: false,
        };
        solved += usize::from(run_episode(&env, t, state, &policy, &mut streams)?.success);
    }
    let rate = solved as f64 / targets.len() as f64;
    c.gate(
        rate >= 0.95,
        format!("512 simulations, uniform priors, min_depth <= 2: solved {solved}/{} = {:.1}% (need >= 95%)", targets.len(), 100.0 * rate),
    );
    Ok(())
}

// --- criterion 5 -----------------------------------------------------------

fn criterion_5(c: &mut Checks) -> Res<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let len = rng.random_range(1..40);
        let r: Vec<f64> = (0..len).map(|_| rng.random_range(-2.0..2.0)).collect();
        let v: Vec<f64> = (0..len).map(|_| rng.random_range(-2.0..2.0)).collect();
        let boot = rng.random_range(-1.0..1.0);
        let (gamma, lambda) = (rng.random_range(0.5..1.0), rng.random_range(0.0..1.0));
        let (adv, ret) = compute_gae(&r, &v, boot, gamma, lambda)?;
        let next = |t: usize| if t + 1 < len { v[t + 1] } else { boot };
        for t in 0..len {
            let sum: f64 = (t..len)
                .map(|l| (gamma * lambda).powi((l - t) as i32) * (r[l] + gamma * next(l) - v[l]))
                .sum();
            worst = worst
                .max((adv[t] - sum).abs())
                .max((ret[t] - adv[t] - v[t]).abs());
        }
    }
    c.gate(
        worst < 1e-10,
        format!("GAE against the unrolled sum on 200 random episodes: max error {worst:.2e}"),
    );

    let (a, _) = compute_gae(&[0.0, 0.0, 1.0], &[0.0; 3], 0.0, 0.9, 0.95)?;
    let ok = ["0.731025", "0.855000", "1.000000"]
        .iter()
        .zip(&a)
        .all(|(s, x)| matches_stated(*x, s));
    c.gate(
        ok,
        format!(
            "A = ({:.6}, {:.6}, {:.6}), stated (0.731025, 0.855, 1.0)",
            a[0], a[1], a[2]
        ),
    );

    let u = ucb_score(3.0, 2, 8, 1.0);
    c.known(
        matches_stated(u, "2.2212"),
        format!("UCB(W=3, N=2, N_parent=8, c=1) = {u:.6}, stated 2.2212 (which uses ln 8 = 1.0397; ln 8 = {:.4})", 8f64.ln()),
    );

    // one state, two actions: zero policy head gives pi = (0.5, 0.5); the Q biases set min-Q = (1, 2)
    let d = Dims {
        input: 1,
        hidden: 2,
        actions: 2,
    };
    let mlp = Mlp::new(d)?;
    let mut p = vec![0.0; mlp.num_params()];
    let (i, h, na) = (d.input, d.hidden, d.actions);
    let q_bias =
        |head: usize| h * i + h + h * h + h + na * h + na + h + 1 + head * (na * h + na) + na * h;
    for head in 0..2 {
        p[q_bias(head)] = 1.0 + head as f64;
        p[q_bias(head) + 1] = 2.0 + head as f64;
    }
    let f = mlp.forward(&p, &[0.0], &[true, true], true)?;
    let q_ok = f.policy == [0.5, 0.5] && f.q1 == [1.0, 2.0] && f.q2 == [2.0, 3.0];
    let v = soft_value(&f, 0.1);
    c.gate(
        q_ok && matches_stated(v, "1.5693"),
        format!("soft value, pi=(0.5,0.5), min-Q=(1,2), alpha=0.1: {v:.6}, stated 1.5693"),
    );

    let tau = temperature(50, 1.0, 0.1, 100);
    c.gate(
        matches_stated(tau, "0.550000"),
        format!("temperature(50; 1.0 -> 0.1 over 100) = {tau:.6}"),
    );
    let dist = temperature_distribution(&[1, 3], 1.0)?;
    c.info(format!(
        "visits (1, 3) at tau=1 give ({:.2}, {:.2})",
        dist[0], dist[1]
    ));
    Ok(())
}

// --- criterion 6 -----------------------------------------------------------

fn fd_setup(seed: u64) -> (Mlp, Vec<f64>, ChaCha8Rng) {
    let mlp = Mlp::new(Dims {
        input: 6,
        hidden: 8,
        actions: 5,
    })
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = mlp.init(seed);
    for v in &mut p {
        *v += rng.random_range(-0.3..0.3);
    }
    (mlp, p, rng)
}

fn rand_mask(rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut m: Vec<bool> = (0..5).map(|_| rng.random_bool(0.7)).collect();
    m[0] = true;
    m
}

fn rand_x(rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn rand_action(m: &[bool], rng: &mut ChaCha8Rng) -> usize {
    let v: Vec<usize> = (0..m.len()).filter(|&i| m[i]).collect();
    v[rng.random_range(0..v.len())]
}

fn criterion_6(c: &mut Checks) -> Res<()> {
    let (mut sup, mut ppo, mut sac) = (0.0f64, 0.0f64, 0.0f64);
    let mut clipped = 0.0;
    for seed in 0..5 {
        let (mlp, p, mut rng) = fd_setup(100 + seed);
        let idx: Vec<usize> = (0..80).map(|_| rng.random_range(0..p.len())).collect();

        let items: Vec<SupervisedItem> = (0..4)
            .map(|_| {
                let m = rand_mask(&mut rng);
                SupervisedItem {
                    x: rand_x(&mut rng),
                    action: rand_action(&m, &mut rng),
                    mask: m,
                    value_target: rng.random_range(-2.0..2.0),
                }
            })
            .collect();
        let (_, g) = supervised_loss(&mlp, &p, &items, 0.7)?;
        sup = sup.max(finite_difference_check(
            |q| Ok(supervised_loss(&mlp, q, &items, 0.7)?.0.loss),
            &p,
            &g,
            &idx,
            1e-5,
        )?);

        let mut items: Vec<PpoItem> = (0..5)
            .map(|_| {
                let m = rand_mask(&mut rng);
                PpoItem {
                    x: rand_x(&mut rng),
                    action: rand_action(&m, &mut rng),
                    mask: m,
                    log_prob_old: 0.0,
                    advantage: rng.random_range(-1.5..1.5),
                    ret: rng.random_range(-1.0..3.0),
                }
            })
            .collect();
        for (i, it) in items.iter_mut().enumerate() {
            let f = mlp.forward(&p, &it.x, &it.mask, false)?;
            it.log_prob_old = f.log_policy[it.action] + [-0.6, -0.05, 0.05, 0.6, 0.1][i];
        }
        let k = PpoCoeffs {
            eps: 0.2,
            c_v: 0.5,
            c_e: 0.05,
        };
        let (rep, g) = ppo_loss(&mlp, &p, &items, k, RatioBaseline::Recorded)?;
        clipped += rep.clip_fraction / 5.0;
        ppo = ppo.max(finite_difference_check(
            |q| {
                Ok(ppo_loss(&mlp, q, &items, k, RatioBaseline::Recorded)?
                    .0
                    .loss)
            },
            &p,
            &g,
            &idx,
            1e-5,
        )?);

        let target: Vec<f64> = p.iter().map(|v| v + rng.random_range(-0.1..0.1)).collect();
        let frozen = p.clone();
        let items: Vec<SacItem> = (0..5)
            .map(|i| {
                let m = rand_mask(&mut rng);
                let mcts = (i % 2 == 0).then(|| {
                    let mut t: Vec<f64> = m
                        .iter()
                        .map(|v| if *v { rng.random_range(0.0..1.0) } else { 0.0 })
                        .collect();
                    let s: f64 = t.iter().sum();
                    t.iter_mut().for_each(|v| *v /= s);
                    t
                });
                SacItem {
                    x: rand_x(&mut rng),
                    action: rand_action(&m, &mut rng),
                    mask: m,
                    reward: rng.random_range(-1.0..1.0),
                    done: i == 4,
                    next_x: rand_x(&mut rng),
                    next_mask: rand_mask(&mut rng),
                    mcts,
                }
            })
            .collect();
        let k = SacCoeffs {
            alpha: 0.2,
            gamma: 0.99,
            lambda_mcts: 0.5,
        };
        let (_, g) = sac_loss(&mlp, &p, &frozen, &target, &items, k)?;
        sac = sac.max(finite_difference_check(
            |q| Ok(sac_loss(&mlp, q, &frozen, &target, &items, k)?.0.loss),
            &p,
            &g,
            &idx,
            1e-5,
        )?);
    }
    c.gate(
        sup < 1e-4,
        format!("supervised (cross-entropy + value): max relative error {sup:.2e}"),
    );
    c.gate(ppo < 1e-4, format!("PPO clipped surrogate + value + entropy ({:.0}% of rows clipped): max relative error {ppo:.2e}", 100.0 * clipped));
    c.gate(
        sac < 1e-4,
        format!("SAC Q + policy + search cross-entropy: max relative error {sac:.2e}"),
    );
    Ok(())
}

// --- criterion 7 -----------------------------------------------------------

fn criterion_7(c: &mut Checks) -> Res<()> {
    let board = gates_board(2)?;
    let env = Env::new(EnvConfig::for_complexity(2, 5, 2))?;
    let cfg = MctsConfig {
        simulations: 4000,
        ..MctsConfig::default()
    };
    let mcts = Mcts {
        env: &env,
        evaluator: &UniformEvaluator,
        config: &cfg,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let t = board.nodes_at_depth(2)[0];
    let state = env.reset_from_board(&board, t, &mut rng)?;
    let visits = mcts.search(&mut SearchTree::new(state.clone()))?;
    let mask = env.action_mask(&state);
    let total: f64 = visits.iter().map(|&v| v as f64).sum();
    let all_visited = (0..mask.len()).all(|a| !mask[a] || visits[a] > 0);
    c.info(format!(
        "search from one root: {} valid actions, all visited: {all_visited}",
        mask.iter().filter(|m| **m).count()
    ));

    // network whose policy equals the visit distribution: zero policy weights, bias = ln visits
    let d = Dims::for_env(&env, 16);
    let mlp = Mlp::new(d)?;
    let mut p = mlp.init(3);
    let bp = d.hidden * d.input + d.hidden + d.hidden * d.hidden + d.hidden + d.actions * d.hidden;
    for a in 0..d.actions {
        p[bp + a] = if visits[a] > 0 {
            (visits[a] as f64 / total).ln()
        } else {
            0.0
        };
    }
    let x = env.features(&state)?;
    let f = mlp.forward(&p, &x, &mask, false)?;
    let gap = (0..d.actions)
        .filter(|&a| mask[a])
        .map(|a| (f.policy[a] - visits[a] as f64 / total).abs())
        .fold(0.0, f64::max);
    c.gate(
        all_visited && gap < 1e-12,
        format!("policy reproduces the visit distribution: max gap {gap:.1e}"),
    );

    let items: Vec<PpoItem> = (0..d.actions)
        .filter(|&a| mask[a])
        .map(|a| PpoItem {
            x: x.clone(),
            mask: mask.clone(),
            action: a,
            log_prob_old: (visits[a] as f64 / total).ln(),
            advantage: if a % 2 == 0 { 1.0 } else { -0.5 },
            ret: 0.0,
        })
        .collect();
    let k = PpoCoeffs {
        eps: 0.2,
        c_v: 0.0,
        c_e: 0.0,
    };
    let (rep, _) = ppo_loss(&mlp, &p, &items, k, RatioBaseline::Recorded)?;
    let ratio_gap = rep
        .ratios
        .iter()
        .map(|r| (r - 1.0).abs())
        .fold(0.0, f64::max);
    c.gate(
        ratio_gap < 1e-12,
        format!(
            "visit probabilities as denominators: {} ratios, max |r - 1| = {ratio_gap:.1e}",
            rep.ratios.len()
        ),
    );
    let (rep, g) = ppo_loss(&mlp, &p, &items, k, RatioBaseline::Tracking)?;
    let gmax = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
    c.gate(
        gmax == 0.0 && rep.ratios.iter().all(|r| *r == 1.0),
        format!("denominator tracking the current policy: ratios all 1, max |grad| = {gmax:.1e}"),
    );
    let (_, g) = ppo_loss(&mlp, &p, &items, k, RatioBaseline::Recorded)?;
    let gmax = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
    c.info(format!("recorded constant denominator at the same point: max |grad| = {gmax:.3e} (the surrogate still has a gradient)"));
    Ok(())
}

// --- criterion 8 -----------------------------------------------------------

fn criterion_8(c: &mut Checks) -> Res<()> {
    let rewards = [1.0, 0.0];
    let items: Vec<SacItem> = (0..2)
        .map(|a| SacItem {
            x: vec![1.0],
            mask: vec![true, true],
            action: a,
            reward: rewards[a],
            done: true,
            next_x: vec![1.0],
            next_mask: vec![true, true],
            mcts: None,
        })
        .collect();
    for alpha in [0.2, 0.5, 1.0] {
        let mlp = Mlp::new(Dims {
            input: 1,
            hidden: 16,
            actions: 2,
        })?;
        let mut params = mlp.init(5);
        let mut opt = Adam::new(
            &NetConfig {
                lr: 1e-2,
                ..NetConfig::default()
            },
            mlp.num_params(),
        );
        let k = SacCoeffs {
            alpha,
            gamma: 0.99,
            lambda_mcts: 0.0,
        };
        for _ in 0..4000 {
            let frozen = params.clone();
            let (_, g) = sac_loss(&mlp, &params, &frozen, &frozen, &items, k)?;
            opt.step(&mut params, &g)?;
        }
        let f = mlp.forward(&params, &[1.0], &[true, true], true)?;
        let q: Vec<f64> = (0..2).map(|a| f.q1[a].min(f.q2[a])).collect();
        let z: f64 = q.iter().map(|v| (v / alpha).exp()).sum();
        let gap = (0..2)
            .map(|a| (f.policy[a] - (q[a] / alpha).exp() / z).abs())
            .fold(0.0, f64::max);
        let zr: f64 = rewards.iter().map(|r| (r / alpha).exp()).sum();
        let gap_r = (0..2)
            .map(|a| (f.policy[a] - (rewards[a] / alpha).exp() / zr).abs())
            .fold(0.0, f64::max);
        c.gate(
            gap < 1e-2 && gap_r < 1e-2,
            format!(
                "alpha={alpha}: pi=({:.4}, {:.4}), Q=({:.4}, {:.4}); |pi - softmax(Q/alpha)| = {gap:.1e}, |pi - softmax(r/alpha)| = {gap_r:.1e}",
                f.policy[0], f.policy[1], q[0], q[1]
            ),
        );
    }
    Ok(())
}

// --- criterion 9 -----------------------------------------------------------

fn desk_config(algo: Algo, out: &Path) -> RunConfig {
    let mut cfg = RunConfig {
        seed: 1,
        out: out.to_path_buf(),
        ..RunConfig::default()
    };
    cfg.board.n_vars = 2;
    cfg.board.modulus = 5;
    cfg.board.max_complexity = 3;
    cfg.train.algo = algo;
    cfg.train.iterations = 200;
    cfg.train.curriculum.min_level = 1;
    cfg.train.curriculum.max_level = 3;
    cfg.eval.complexities = vec![3];
    cfg.eval.episodes = 1000;
    cfg.eval.tau = 0.1;
    cfg
}

fn criterion_9(c: &mut Checks) -> Res<()> {
    let dir = tempfile::tempdir()?;
    for algo in [Algo::Ppo, Algo::Sac] {
        let t = Instant::now();
        let mut cfg = desk_config(algo, &dir.path().join(algo.to_string()));
        let trained = commands::train(&cfg, None)?;
        let train_secs = t.elapsed().as_secs_f64();
        let last = trained.metrics.last().ok_or("no iterations")?;
        let out = commands::eval(
            &cfg,
            Some(&trained.checkpoint),
            None,
            Some(trained.final_alpha),
        )?;
        let (agent, random) = (&out.agent[0], &out.baseline[0]);
        let ok = agent.success_pct >= 3.0 * random.success_pct && agent.success_pct > 0.0;
        c.gate(
            ok,
            format!(
                "{algo}: C=3 success {:.1}% (avg reward {:.3}, entropy {:.3}) vs random {:.1}%; need >= 3x random and > 0",
                agent.success_pct, agent.avg_reward, agent.avg_entropy, random.success_pct
            ),
        );
        cfg.eval.agent = AgentKind::Policy;
        cfg.eval.baseline = false;
        cfg.out = dir.path().join(format!("{algo}_policy"));
        let raw = commands::eval(
            &cfg,
            Some(&trained.checkpoint),
            None,
            Some(trained.final_alpha),
        )?;
        c.info(format!(
            "{algo}: final level {}, last training success {:.3}; network policy without search {:.1}% at C=3; train {:.0}s, total {:.0}s",
            last.level,
            last.success_rate,
            raw.agent[0].success_pct,
            train_secs,
            t.elapsed().as_secs_f64()
        ));
    }
    Ok(())
}

// --- criterion 10 ----------------------------------------------------------

const SMALL: &str = r#"
seed = 3
[board]
n_vars = 2
modulus = 5
max_complexity = 2
[net]
hidden = 32
[mcts]
simulations = 16
[train]
algo = "ALGO"
iterations = 4
steps_per_iteration = 48
[train.ppo]
minibatch = 16
[train.sac]
batch_size = 16
[train.pretrain]
epochs = 2
[train.curriculum]
max_level = 2
[eval]
episodes = 40
simulations = 16
"#;

fn run_cli(args: &[&str]) -> Res<Vec<u8>> {
    let out = Command::new(env!("CARGO_BIN_EXE_polycircuit"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()?;
    if !out.status.success() {
        return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)).into());
    }
    Ok(out.stdout)
}

fn criterion_10(c: &mut Checks) -> Res<()> {
    let dir = tempfile::tempdir()?;
    for algo in ["ppo", "sac"] {
        let cfg_path = dir.path().join(format!("{algo}.toml"));
        std::fs::write(&cfg_path, SMALL.replace("ALGO", algo))?;
        let cfg = cfg_path.to_str().ok_or("path")?;
        let run = |tag: &str| -> Res<std::path::PathBuf> {
            let out = dir.path().join(format!("{algo}_{tag}"));
            let o = out.to_str().ok_or("path")?;
            run_cli(&[
                "board-build",
                "--config",
                cfg,
                "--deterministic",
                "--out",
                o,
            ])?;
            run_cli(&["train", "--config", cfg, "--deterministic", "--out", o])?;
            let ckpt = out.join("model.ckpt");
            run_cli(&[
                "eval",
                "--config",
                cfg,
                "--deterministic",
                "--out",
                o,
                "--checkpoint",
                ckpt.to_str().ok_or("path")?,
            ])?;
            Ok(out)
        };
        let (a, b) = (run("a")?, run("b")?);
        let files = [
            "board.txt",
            "board_stats.txt",
            "pretrain.csv",
            "metrics.csv",
            "model.ckpt",
            "eval.csv",
            "eval_random.csv",
        ];
        let mut differing = Vec::new();
        for f in files {
            if std::fs::read(a.join(f))? != std::fs::read(b.join(f))? {
                differing.push(f);
            }
        }
        c.gate(differing.is_empty(), format!("{algo}: board-build, train, eval re-run byte-identical ({}) differing: {differing:?}", files.join(", ")));
    }
    let oracle = [
        "oracle",
        "--target",
        "x0^2 + 2*x0*x1 + x1^2",
        "--n-vars",
        "2",
    ];
    c.gate(
        run_cli(&oracle)? == run_cli(&oracle)?,
        "oracle output repeats",
    );
    Ok(())
}

// ---------------------------------------------------------------------------

type Criterion = fn(&mut Checks) -> Res<()>;

fn main() {
    let criteria: [(&str, Criterion); 10] = [
        ("algebra", criterion_1),
        ("board reproduction", criterion_2),
        ("oracle agreement", criterion_3),
        ("search correctness", criterion_4),
        ("formula checks", criterion_5),
        ("gradient checks", criterion_6),
        ("PPO ratio provenance", criterion_7),
        ("SAC bandit fixed point", criterion_8),
        ("desk-scale learning", criterion_9),
        ("determinism", criterion_10),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .and_then(|v| v.parse().ok());
    let mut gate_failures = 0;
    let mut summary = String::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let t = Instant::now();
        let mut checks = Checks::default();
        if let Err(e) = run(&mut checks) {
            checks.gate(false, format!("error: {e}"));
        }
        let pass = checks.0.iter().all(|c| c.ok);
        let known_only = !pass && checks.0.iter().all(|c| c.ok || c.kind == Kind::Known);
        let status = if pass { "PASS" } else { "FAIL" };
        let note = if known_only {
            " (known unattainable value, see below)"
        } else {
            ""
        };
        let line = format!(
            "{status} {id:>2} {name} [{:.1}s]{note}",
            t.elapsed().as_secs_f64()
        );
        println!("{line}");
        for ch in &checks.0 {
            let tag = match (ch.kind, ch.ok) {
                (Kind::Info, _) => "info",
                (_, true) => "ok",
                (Kind::Gate, false) => "FAILED",
                (Kind::Known, false) => "KNOWN",
            };
            println!("        {tag:<6} {}", ch.text);
        }
        gate_failures += checks
            .0
            .iter()
            .filter(|c| c.kind == Kind::Gate && !c.ok)
            .count();
        writeln!(summary, "{line}").unwrap();
    }
    println!("\nsummary\n{summary}");
    if gate_failures > 0 {
        eprintln!("{gate_failures} gated check(s) failed");
        std::process::exit(1);
    }
}
