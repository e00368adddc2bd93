mod common;

use common::step_chain;
use diraccbd::blocks::Mode;
use diraccbd::dsl::load;
use diraccbd::graph::{simulate, LoopError, SimConfig, SimError, StepError, Trace};
use diraccbd::io::{write_trace, Format};
use diraccbd::signal::StepSample;

fn run(src: &str, mode: Mode, h: f64, t_end: f64) -> Trace {
    let model = load(src).unwrap_or_else(|e| panic!("{}", e.render("test")));
    simulate(&model, "Main", &SimConfig::new(mode, h, t_end)).unwrap()
}

fn event_index(tr: &Trace) -> usize {
    let s = tr.signal("s").unwrap();
    s.iter()
        .position(|x| x.is_discontinuous() || x.right == 1.0)
        .unwrap()
}

#[test]
fn integrating_a_unit_impulse_gives_a_unit_step() {
    let tr = run(&step_chain(1), Mode::Symbolic, 0.1, 1.0);
    let e = event_index(&tr);
    assert!((tr.times[e] - 0.25).abs() <= 1e-9);
    let d1 = tr.signal("d1").unwrap();
    assert_eq!(d1[e].impulses.get(0), 1.0);
    let i = tr.signal("i").unwrap();
    for (k, s) in i.iter().enumerate() {
        let want = match k.cmp(&e) {
            std::cmp::Ordering::Less => StepSample::value(0.0),
            std::cmp::Ordering::Equal => StepSample::limits(0.0, 1.0),
            std::cmp::Ordering::Greater => StepSample::value(1.0),
        };
        assert_eq!(*s, want, "step {k}");
    }
}

#[test]
fn derivative_chains_shift_the_numerical_support() {
    for k in 1..=4usize {
        let src = step_chain(k);
        let sym = run(&src, Mode::Symbolic, 0.1, 1.5);
        let num = run(&src, Mode::Numerical, 0.1, 1.5);
        assert_eq!(sym.times, num.times);
        let e = event_index(&sym);
        let name = format!("d{k}");

        let imps: Vec<_> = sym.impulses.iter().filter(|ev| ev.signal == name).collect();
        assert_eq!(imps.len(), 1, "k={k}");
        assert_eq!(imps[0].order as usize, k - 1);
        assert_eq!(imps[0].time, sym.times[e]);
        assert!(sym
            .signal(&name)
            .unwrap()
            .iter()
            .all(|s| s.left == 0.0 && s.right == 0.0));

        let support: Vec<usize> = num
            .signal(&name)
            .unwrap()
            .iter()
            .enumerate()
            .filter(|(_, s)| s.left != 0.0)
            .map(|(j, _)| j)
            .collect();
        assert_eq!(support.first(), Some(&e), "k={k}");
        assert_eq!(support.last(), Some(&(e + k - 1)), "k={k}");
        assert!(num.impulses.is_empty());
    }
}

#[test]
fn identical_runs_write_identical_files() {
    let model = load(diraccbd::models::BOUNCING_BALL).unwrap();
    let cfg = SimConfig::new(Mode::Symbolic, 1e-3, 2.0);
    let files: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            let tr = simulate(&model, "Main", &cfg).unwrap();
            let mut buf = Vec::new();
            write_trace(&tr, Format::Csv, &mut buf).unwrap();
            buf
        })
        .collect();
    assert_eq!(files[0], files[1]);
}

#[test]
fn decision_selects_by_condition() {
    let src = "cbd Main(out y) {
    block one = Constant(1);
    block clock = Integrator(init = 0);
    block at = Constant(-0.5);
    block cond = Adder();
    block u = Constant(10);
    block v = Constant(20);
    block pick = Decision();
    one.out -> clock.in;
    clock.out -> cond.in1;
    at.out -> cond.in2;
    u.out -> pick.u;
    v.out -> pick.v;
    cond.out -> pick.c;
    pick.out -> y;
}";
    let tr = run(src, Mode::Symbolic, 0.2, 1.0);
    let y = tr.signal("y").unwrap();
    let e = y.iter().position(|s| s.is_discontinuous()).unwrap();
    assert!((tr.times[e] - 0.5).abs() <= 1e-9);
    assert_eq!(y[e], StepSample::limits(20.0, 10.0));
    assert!(y[..e].iter().all(|s| *s == StepSample::value(20.0)));
    assert!(y[e + 1..].iter().all(|s| *s == StepSample::value(10.0)));
}

#[test]
fn delay_feedback_counts_steps() {
    let src = "cbd Main(out n) {
    block one = Constant(1);
    block prev = Delay(init = 0);
    block next = Adder();
    one.out -> next.in1;
    prev.out -> next.in2;
    next.out -> prev.in;
    next.out -> n;
}";
    let tr = run(src, Mode::Symbolic, 0.5, 2.0);
    let n: Vec<f64> = tr.signal("n").unwrap().iter().map(|s| s.left).collect();
    assert_eq!(n, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
}

#[test]
fn singular_loop_is_reported() {
    let src = "cbd Main(out x) {
    block one = Constant(1);
    block sum = Adder();
    one.out -> sum.in1;
    sum.out -> sum.in2;
    sum.out -> x;
}";
    let model = load(src).unwrap();
    let err = simulate(&model, "Main", &SimConfig::new(Mode::Symbolic, 0.1, 1.0)).unwrap_err();
    assert!(
        matches!(
            err,
            SimError::Step {
                source: StepError::Loop(LoopError::SingularLoop { .. }),
                ..
            }
        ),
        "{err:?}"
    );
}

#[test]
fn chattering_condition_is_flagged_as_zeno() {
    // d alternates between 1 and -1 from one step to the next whatever the
    // step size, so every step is an event shrunk to the minimum step.
    let src = "cbd Main(out s) {
    block prev = Delay(init = 1);
    block flip = Negator();
    block sw = Switch();
    prev.out -> flip.in;
    flip.out -> prev.in;
    prev.out -> sw.c;
    sw.out -> s;
}";
    let model = load(src).unwrap();
    let err = simulate(&model, "Main", &SimConfig::new(Mode::Symbolic, 0.1, 1.0)).unwrap_err();
    assert!(matches!(err, SimError::ZenoSuspected { .. }), "{err:?}");
}

#[test]
fn numerical_mode_never_logs_impulses() {
    let model = load(diraccbd::models::BOUNCING_BALL).unwrap();
    let tr = simulate(&model, "Main", &SimConfig::new(Mode::Numerical, 1e-3, 2.0)).unwrap();
    assert!(tr.impulses.is_empty());
    assert!(tr.samples.iter().flatten().all(|s| !s.is_discontinuous()));
}

#[test]
fn watch_accepts_block_paths_and_aliases() {
    let model = load(diraccbd::models::BOUNCING_BALL).unwrap();
    let cfg = SimConfig::new(Mode::Symbolic, 1e-2, 0.1).watching([
        "ball/Integrator_y",
        "detector/c",
        "y",
    ]);
    let tr = simulate(&model, "Main", &cfg).unwrap();
    assert_eq!(tr.signals, ["ball/Integrator_y", "detector/c", "y"]);
    assert_eq!(tr.samples[0], tr.samples[2]);
}
