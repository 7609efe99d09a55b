//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use musictraces_cli::generator::random_scenario;
use musictraces_cli::run::run_scenario;
use musictraces_cli::scenario::Action;
use musictraces_core::chord::ChordSymbol;
use musictraces_core::control::ControlCommand;
use musictraces_core::hints::{line_similarity, NotificationKind};
use musictraces_core::interaction::{DeviceAction, DeviceTarget, EvolutionMode, InputEvent, InputKind};
use musictraces_core::playback::{attach_nodes, NoteSource};
use musictraces_core::rng::SceneRng;
use musictraces_core::scene::{finalize_stroke, hit_test, HintOrigin, ObjectId, SceneState, TemporaryStroke};
use musictraces_core::{
    default_model, parse_chord_corpus, train_markov, Effects, Engine, EngineConfig, PlayerId, Vec2,
};
use musictraces_protocol::delta;
use musictraces_protocol::{
    decode, encode_line, replay_text, Body, Digest, ErrorCode, Message, Role, SessionLog, Snapshot,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn engine_with(cfg: EngineConfig) -> Engine {
    Engine::new(cfg, default_model()).unwrap()
}

fn hand(tick: u64, slot: u8, x: f64, y: f64) -> InputEvent {
    InputEvent {
        tick,
        kind: InputKind::HandMove {
            player: slot,
            pos: Vec2::new(x, y),
            screen_distance: 1.5,
        },
    }
}

fn brush(tick: u64, slot: u8, pressed: bool) -> InputEvent {
    InputEvent {
        tick,
        kind: InputKind::BrushButton { player: slot, pressed },
    }
}

fn floor(tick: u64, slot: u8, x: f64, y: f64) -> InputEvent {
    InputEvent {
        tick,
        kind: InputKind::FloorMove {
            player: slot,
            pos: Vec2::new(x, y),
        },
    }
}

fn feed(e: &mut Engine, events: &[InputEvent]) -> Effects {
    let mut fx = Effects::default();
    for ev in events {
        fx.extend(e.process_event(ev).expect("scripted input is valid"));
    }
    fx
}

// ---------------------------------------------------------------- determinism

fn tamper(msg: &mut Message) {
    match &mut msg.body {
        Body::Input(ev) => match &mut ev.kind {
            InputKind::HandMove { pos, .. } | InputKind::FloorMove { pos, .. } => {
                pos.x = if pos.x < 0.5 { pos.x + 0.25 } else { pos.x - 0.25 };
            }
            InputKind::BrushButton { pressed, .. } => *pressed = !*pressed,
            InputKind::EraserHeld { held, .. } => *held = !*held,
            InputKind::Tick => ev.kind = InputKind::SensorLost,
            InputKind::SensorLost => ev.kind = InputKind::Tick,
        },
        Body::Control(cmd) => {
            *cmd = if *cmd == ControlCommand::ToggleBlobs {
                ControlCommand::ToggleBgMusic
            } else {
                ControlCommand::ToggleBlobs
            }
        }
        Body::HashCheck { hash } => hash.0 ^= 1,
        other => panic!("unexpected record kind {}", other.kind()),
    }
}

fn determinism() -> Outcome {
    const SCENARIOS: u64 = 100;
    const EVENTS: usize = 2000;
    const TAMPERS: usize = 3;
    let start = Instant::now();
    let mut records = 0;
    let mut tampered = 0;
    for seed in 0..SCENARIOS {
        let scn = random_scenario(seed, EVENTS);
        let cfg = EngineConfig {
            seed,
            ..EngineConfig::default()
        };
        let out = run_scenario(&scn, cfg.clone(), default_model()).map_err(|e| format!("seed {seed}: {e}"))?;
        let again = run_scenario(&scn, cfg, default_model()).map_err(|e| e.to_string())?;
        ensure!(again.log == out.log, "seed {seed}: two recordings differ");
        let replayed = replay_text(&out.log).map_err(|e| format!("seed {seed}: replay failed: {e}"))?;
        ensure!(
            replayed.final_hash == out.final_hash,
            "seed {seed}: replayed {} != recorded {}",
            Digest(replayed.final_hash),
            Digest(out.final_hash)
        );
        let log = SessionLog::parse(&out.log).map_err(|e| e.to_string())?;
        records += log.records.len();
        let mut rng = SceneRng::new(seed);
        for _ in 0..TAMPERS {
            let i = rng.index(log.records.len());
            let mut copy = log.clone();
            tamper(&mut copy.records[i]);
            ensure!(
                replay_text(&copy.to_text()).is_err(),
                "seed {seed}: tampered record {} ({}) went undetected",
                i + 1,
                log.records[i].body.kind()
            );
            tampered += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 60.0, "took {secs:.1} s");
    Ok(format!(
        "{SCENARIOS} scenarios x {EVENTS} events, {records} records, {tampered}/{tampered} tamperings detected, {secs:.1} s"
    ))
}

// --------------------------------------------------------------------- markov

fn chord(s: &str) -> ChordSymbol {
    s.parse().unwrap()
}

fn markov() -> Outcome {
    // counted by hand: C->F 2, C->G 1; F->G 1, F->C 2; G->C 1; Am->F 1
    let toy = parse_chord_corpus("C F G C\nAm F C G\nC F C\n").map_err(|e| e.to_string())?;
    let m = train_markov(&toy.sequences).map_err(|e| e.to_string())?;
    let expected = [
        ("C", "F", 2.0 / 3.0),
        ("C", "G", 1.0 / 3.0),
        ("C", "C", 0.0),
        ("F", "G", 1.0 / 3.0),
        ("F", "C", 2.0 / 3.0),
        ("G", "C", 1.0),
        ("G", "F", 0.0),
        ("Am", "F", 1.0),
        ("Am", "C", 0.0),
    ];
    for (a, b, p) in expected {
        let got = m.probability(chord(a), chord(b));
        ensure!(got == p, "P({b}|{a}) = {got}, hand count gives {p}");
    }
    ensure!(
        m.counts()[m.index_of(chord("C")).unwrap()].iter().sum::<u64>() == 3,
        "C row count"
    );

    let mut rng = SceneRng::new(11);
    let mut corpus = String::new();
    let names = ["C", "Dm", "Em", "F", "G", "Am", "Bdim", "F#m", "Bb", "E7"];
    for _ in 0..40 {
        let n = 2 + rng.index(12);
        let line: Vec<&str> = (0..n).map(|_| names[rng.index(names.len())]).collect();
        corpus.push_str(&line.join(" "));
        corpus.push('\n');
    }
    let random = train_markov(&parse_chord_corpus(&corpus).unwrap().sequences).unwrap();
    let mut rows = 0;
    for model in [&m, &random, &default_model()] {
        for row in model.transitions() {
            let s: f64 = row.iter().sum();
            ensure!((s - 1.0).abs() <= 1e-9, "row sums to {s}");
            rows += 1;
        }
    }

    const SAMPLES: usize = 100_000;
    let mut worst: f64 = 0.0;
    for model in [&m, &default_model()] {
        let vocab = model.vocabulary().to_vec();
        for (i, &from) in vocab.iter().enumerate() {
            let mut hist = vec![0usize; vocab.len()];
            for _ in 0..SAMPLES {
                let next = model.next_chord(from, &mut rng).map_err(|e| e.to_string())?;
                hist[model.index_of(next).unwrap()] += 1;
            }
            for (j, &h) in hist.iter().enumerate() {
                let dev = (h as f64 / SAMPLES as f64 - model.transitions()[i][j]).abs();
                worst = worst.max(dev);
                ensure!(dev <= 0.02, "{from}->{}: empirical deviates by {dev:.4}", vocab[j]);
            }
        }
    }
    Ok(format!(
        "{rows} rows sum to 1, toy counts exact, max sampling deviation {worst:.4}"
    ))
}

// ----------------------------------------------------------- chord membership

fn chord_membership() -> Outcome {
    const EVENTS: usize = 10_000;
    let auto = EngineConfig {
        seed: 21,
        evolution_mode: EvolutionMode::Automatic,
        auto_evolution_seconds: 2.0,
        ..EngineConfig::default()
    };
    let inter = EngineConfig {
        seed: 22,
        evolution_cooldown_seconds: 0.5,
        ..EngineConfig::default()
    };
    let mixed = EngineConfig {
        seed: 23,
        ..EngineConfig::default()
    };
    let (mut checked, mut changes, mut events) = (0usize, 0usize, 0usize);
    for (k, cfg) in [auto, inter, mixed].into_iter().enumerate() {
        let scn = random_scenario(1000 + k as u64, EVENTS);
        let mut e = engine_with(cfg);
        for step in &scn.steps {
            let before = e.scene().current_chord;
            let fx = match &step.action {
                Action::Input(kind) => e.process_event(&InputEvent {
                    tick: step.tick,
                    kind: kind.clone(),
                }),
                Action::Control(cmd) => {
                    let mut fx = e.advance_to(step.tick);
                    e.apply_command(cmd).map(|more| {
                        fx.extend(more);
                        fx
                    })
                }
            }
            .map_err(|err| format!("line {}: {err}", step.line))?;
            events += 1;
            changes += fx.chord_changes.len();
            for (note, c) in fx.notes.iter().zip(fx.note_chords(before)) {
                if note.source.is_pitched() {
                    checked += 1;
                    ensure!(
                        c.contains_pitch_class(note.pitch % 12),
                        "tick {}: {} note {} outside {c}",
                        note.tick,
                        note.source.as_str(),
                        note.pitch
                    );
                }
            }
        }
    }
    ensure!(
        checked > 1000 && changes > 10,
        "too little coverage: {checked} notes, {changes} changes"
    );
    Ok(format!(
        "{events} events, {checked} pitched notes, {changes} chord changes, 0 violations"
    ))
}

// -------------------------------------------------------------- dwell

fn dwell_threshold() -> Outcome {
    let cfg = EngineConfig::default();
    let limit = (cfg.dwell_seconds * cfg.tick_rate as f64) as u64;
    let mut traces = 0;
    for hold in limit - 5..=limit + 5 {
        for jitter in [false, true] {
            let mut e = engine_with(cfg.clone());
            let t0 = 7;
            feed(&mut e, &[hand(t0, 1, 0.4, 0.4), brush(t0, 1, true)]);
            let mut created = None;
            for t in t0 + 1..=t0 + hold {
                if jitter {
                    let dx = if t % 2 == 0 { 0.004 } else { -0.004 };
                    feed(&mut e, &[hand(t, 1, 0.4 + dx, 0.4)]);
                } else {
                    e.advance_to(t);
                }
                if created.is_none() && e.scene().nodes().count() > 0 {
                    created = Some(t - t0);
                }
            }
            let stationary = hold as f64 / cfg.tick_rate as f64;
            let expect = stationary > cfg.dwell_seconds + 1e-9;
            ensure!(
                created.is_some() == expect,
                "held {hold} ticks ({stationary:.3} s, jitter {jitter}): node created {created:?}"
            );
            if let Some(at) = created {
                ensure!(
                    at == limit + 1,
                    "node appeared after {at} ticks, expected {}",
                    limit + 1
                );
            }
            traces += 1;
        }
    }
    // moving beyond the radius restarts the count
    let mut e = engine_with(cfg.clone());
    feed(&mut e, &[hand(1, 1, 0.4, 0.4), brush(1, 1, true)]);
    e.advance_to(21);
    feed(&mut e, &[hand(22, 1, 0.45, 0.4)]);
    e.advance_to(45);
    ensure!(e.scene().nodes().count() == 0, "a move reset was ignored");
    e.advance_to(53);
    ensure!(
        e.scene().nodes().count() == 1,
        "no node after a full second at the new spot"
    );
    Ok(format!(
        "{} traces, node exactly at tick {} of stillness",
        traces + 1,
        limit + 1
    ))
}

// ---------------------------------------------------------------- idle

fn vibrate_on(fx: &Effects, target: DeviceTarget) -> Vec<u64> {
    fx.devices
        .iter()
        .filter(|d| d.target == target && d.action == DeviceAction::Vibrate { on: true })
        .map(|d| d.tick)
        .collect()
}

fn led(fx: &Effects, target: DeviceTarget) -> Vec<u64> {
    fx.devices
        .iter()
        .filter(|d| d.target == target && matches!(d.action, DeviceAction::Led { .. }))
        .map(|d| d.tick)
        .collect()
}

fn auto_hints(e: &Engine, p: PlayerId) -> usize {
    e.scene()
        .hints()
        .filter(|h| h.target_player == p && h.origin == HintOrigin::Auto)
        .count()
}

fn idle_staging() -> Outcome {
    let cfg = EngineConfig::default();
    let stage = |s: f64| cfg.ticks(s) + 1;
    let (vib, light, hint) = (stage(20.0), stage(40.0), stage(60.0));
    let mut runs = 0;
    for (slot, target, p) in [
        (1u8, DeviceTarget::BrushP1, PlayerId::P1),
        (2, DeviceTarget::BrushP2, PlayerId::P2),
    ] {
        for (t_act, draw_line) in [(5u64, false), (133, false), (9, true), (250, true)] {
            let mut e = engine_with(cfg.clone());
            let last = if draw_line {
                let mut evs = vec![hand(t_act, slot, 0.2, 0.3), brush(t_act, slot, true)];
                for i in 1..=10 {
                    evs.push(hand(t_act + i, slot, 0.2 + 0.03 * i as f64, 0.3));
                }
                evs.push(brush(t_act + 11, slot, false));
                feed(&mut e, &evs);
                ensure!(e.scene().lines().count() == 1, "line was not drawn");
                t_act + 11
            } else {
                feed(
                    &mut e,
                    &[
                        hand(t_act, slot, 0.5, 0.5),
                        brush(t_act, slot, true),
                        brush(t_act, slot, false),
                    ],
                );
                t_act
            };
            let mut fx = Effects::default();
            let mut hint_at = None;
            for t in last + 1..=last + hint + 30 {
                fx.extend(e.advance_to(t));
                if hint_at.is_none() && auto_hints(&e, p) > 0 {
                    hint_at = Some(t - last);
                }
            }
            let v: Vec<u64> = vibrate_on(&fx, target).iter().map(|t| t - last).collect();
            ensure!(v == [vib], "{p}: vibrate after {v:?} ticks, expected {vib}");
            let l: Vec<u64> = led(&fx, target).iter().map(|t| t - last).collect();
            ensure!(
                l.first() == Some(&light),
                "{p}: first LED after {l:?} ticks, expected {light}"
            );
            let stuck: Vec<u64> = fx
                .notifications
                .iter()
                .filter(|n| n.kind == NotificationKind::IdleStuck && n.player == Some(p))
                .map(|n| n.tick - last)
                .collect();
            if draw_line {
                ensure!(hint_at.is_none(), "{p}: auto hint after the first line");
                ensure!(
                    stuck == [hint],
                    "{p}: idle notification after {stuck:?} ticks, expected {hint}"
                );
            } else {
                ensure!(
                    hint_at == Some(hint),
                    "{p}: auto hint after {hint_at:?} ticks, expected {hint}"
                );
                ensure!(stuck.is_empty(), "{p}: notification before the first line");
            }
            runs += 1;
        }
    }
    Ok(format!(
        "{runs} runs, vibrate/LED/hint at +{vib}/+{light}/+{hint} ticks"
    ))
}

// ------------------------------------------------------------ playback counts

/// Leaves a node at `pos` by holding the brush still past the dwell time.
fn drop_node(e: &mut Engine, t: u64, pos: (f64, f64)) -> u64 {
    feed(e, &[hand(t, 1, pos.0, pos.1), brush(t, 1, true)]);
    e.advance_to(t + 32);
    feed(e, &[brush(t + 32, 1, false)]);
    t + 33
}

fn draw_path(e: &mut Engine, t0: u64, pts: &[(f64, f64)]) -> u64 {
    let mut t = t0;
    let mut evs = vec![hand(t, 1, pts[0].0, pts[0].1), brush(t, 1, true)];
    for &(x, y) in &pts[1..] {
        t += 1;
        evs.push(hand(t, 1, x, y));
    }
    t += 1;
    evs.push(brush(t, 1, false));
    feed(e, &evs);
    t + 1
}

/// Player 2 touches the line at `at`, waits and leaves again; returns the
/// cursor notes heard in that window.
fn hit_and_listen(e: &mut Engine, t: u64, at: (f64, f64), ticks: u64) -> (Vec<u8>, u64) {
    let mut fx = feed(e, &[hand(t, 2, 0.02, 0.98), hand(t + 1, 2, at.0, at.1)]);
    fx.extend(e.advance_to(t + 1 + ticks));
    feed(e, &[hand(t + 2 + ticks, 2, 0.02, 0.98)]);
    let v = fx
        .notes
        .iter()
        .filter(|n| n.source == NoteSource::CursorPass)
        .map(|n| n.velocity)
        .collect();
    (v, t + 3 + ticks)
}

fn playback_counts() -> Outcome {
    let cfg = EngineConfig::default();
    let loops = cfg.closed_loops as usize;
    let mut cases = 0;
    for n in 1..=6usize {
        // open line through n nodes
        let mut e = engine_with(cfg.clone());
        let mut t = 1;
        for i in 0..n {
            t = drop_node(&mut e, t, (0.2 + 0.1 * i as f64, 0.5));
        }
        ensure!(e.scene().nodes().count() == n, "expected {n} nodes");
        let pts: Vec<(f64, f64)> = (0..=40).map(|i| (0.1 + 0.02 * i as f64, 0.5)).collect();
        t = draw_path(&mut e, t, &pts);
        let line = e.scene().lines().next().ok_or("no open line")?;
        ensure!(
            !line.closed && line.melody().len() == n,
            "open line carries {} nodes",
            line.melody().len()
        );
        for _ in 0..2 {
            let (v, next) = hit_and_listen(&mut e, t, (0.15, 0.5), 200);
            ensure!(v.len() == n, "open line with {n} nodes emitted {}", v.len());
            t = next;
        }

        // closed loop through n nodes
        let mut e = engine_with(cfg.clone());
        let mut t = 1;
        let c = (0.5, 0.5);
        let r = 0.2;
        let on_circle = |a: f64| (c.0 + r * a.cos(), c.1 + r * a.sin());
        for i in 0..n {
            t = drop_node(&mut e, t, on_circle(TAU * (i as f64 + 0.5) / n as f64));
        }
        let pts: Vec<(f64, f64)> = (0..=48).map(|i| on_circle(TAU * i as f64 / 48.0)).collect();
        t = draw_path(&mut e, t, &pts);
        let line = e.scene().lines().next().ok_or("no closed line")?;
        ensure!(
            line.closed && line.melody().len() == n,
            "closed line carries {} nodes",
            line.melody().len()
        );
        let (v, _) = hit_and_listen(&mut e, t, on_circle(0.0), 600);
        ensure!(
            v.len() == loops * n,
            "closed line with {n} nodes emitted {}, expected {}",
            v.len(),
            loops * n
        );
        ensure!(v.windows(2).all(|w| w[0] >= w[1]), "velocities increase: {v:?}");
        ensure!(v.first() > v.last(), "loops do not fade: {v:?}");

        // silent line
        let mut e = engine_with(cfg.clone());
        let t = draw_path(&mut e, 1, &pts);
        ensure!(
            e.scene().lines().next().is_some_and(|l| l.silent),
            "expected a silent line"
        );
        let (v, _) = hit_and_listen(&mut e, t, on_circle(0.0), 600);
        ensure!(v.is_empty(), "silent line emitted {}", v.len());
        ensure!(e.scene().cursors().count() == 0, "silent line got a cursor");
        cases += 3;
    }
    Ok(format!("{cases} lines, open n, closed {loops}n fading, silent 0"))
}

// ----------------------------------------------------------- geometry oracles

fn seg_distance(p: Vec2, a: Vec2, b: Vec2) -> (f64, f64) {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.x + t * dx, a.y + t * dy);
    (((p.x - qx).powi(2) + (p.y - qy).powi(2)).sqrt(), t * len2.sqrt())
}

/// Nearest distance to a polyline and the arclength there, plus the
/// runner-up distance at a different arclength for tie detection.
fn brute_project(points: &[Vec2], p: Vec2) -> (f64, f64, f64) {
    let mut best = (f64::INFINITY, 0.0);
    let mut second = f64::INFINITY;
    let mut offset = 0.0;
    for w in points.windows(2) {
        let (d, along) = seg_distance(p, w[0], w[1]);
        if d < best.0 {
            if (offset + along - best.1).abs() > 1e-9 {
                second = best.0;
            }
            best = (d, offset + along);
        } else if (offset + along - best.1).abs() > 1e-9 {
            second = second.min(d);
        }
        offset += ((w[1].x - w[0].x).powi(2) + (w[1].y - w[0].y).powi(2)).sqrt();
    }
    (best.0, best.1, second)
}

fn random_polyline(rng: &mut SceneRng) -> Vec<Vec2> {
    let k = 2 + rng.index(10);
    let mut p = Vec2::new(rng.range(0.1, 0.9), rng.range(0.1, 0.9));
    let mut pts = vec![p];
    for _ in 1..k {
        p = Vec2::new(
            (p.x + rng.range(-0.2, 0.2)).clamp(0.0, 1.0),
            (p.y + rng.range(-0.2, 0.2)).clamp(0.0, 1.0),
        );
        pts.push(p);
    }
    pts
}

fn geometry_oracles() -> Outcome {
    const SCENES: usize = 1000;
    const EPS: f64 = 1e-12;
    let cfg = EngineConfig::default();
    let mut rng = SceneRng::new(77);
    let (mut queries, mut attached) = (0usize, 0usize);
    for s in 0..SCENES {
        let mut scene = SceneState::new(&cfg, chord("C"));
        for _ in 0..rng.index(30) {
            let owner = if rng.index(2) == 0 { PlayerId::P1 } else { PlayerId::P2 };
            scene.add_node(owner, Vec2::new(rng.next_f64(), rng.next_f64()), &cfg);
        }
        for _ in 0..rng.index(6) {
            let stroke = TemporaryStroke {
                id: ObjectId(0),
                owner: PlayerId::P1,
                points: random_polyline(&mut rng),
                created_tick: 0,
                released_tick: None,
                alpha: 1.0,
            };
            let thickness = rng.range(0.004, 0.03);
            let _ = finalize_stroke(&mut scene, PlayerId::P1, &stroke, thickness, &[], &cfg);
        }
        for _ in 0..20 {
            let q = Vec2::new(rng.next_f64(), rng.next_f64());
            let radius = rng.range(0.005, 0.12);
            let mut expected: Vec<(f64, ObjectId)> = Vec::new();
            let mut boundary = BTreeSet::new();
            for n in scene.nodes() {
                let d = ((n.pos.x - q.x).powi(2) + (n.pos.y - q.y).powi(2)).sqrt();
                if (d - radius).abs() < EPS {
                    boundary.insert(n.id);
                } else if d <= radius {
                    expected.push((d, n.id));
                }
            }
            for l in scene.lines() {
                let d = brute_project(&l.points, q).0;
                let limit = radius + l.thickness / 2.0;
                if (d - limit).abs() < EPS {
                    boundary.insert(l.id);
                } else if d <= limit {
                    expected.push((d, l.id));
                }
            }
            expected.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let got: Vec<ObjectId> = hit_test(&scene, q, radius)
                .into_iter()
                .filter(|id| !boundary.contains(id))
                .collect();
            let want: Vec<ObjectId> = expected.iter().map(|e| e.1).collect();
            if got != want {
                let gs: BTreeSet<_> = got.iter().collect();
                let ws: BTreeSet<_> = want.iter().collect();
                ensure!(gs == ws, "scene {s}: hit_test {got:?}, brute force {want:?}");
                // same set; order may only differ between equidistant hits
                for (g, w) in got.iter().zip(&want) {
                    let dg = expected.iter().find(|e| e.1 == *g).unwrap().0;
                    let dw = expected.iter().find(|e| e.1 == *w).unwrap().0;
                    ensure!((dg - dw).abs() < 1e-9, "scene {s}: hit order differs");
                }
            }
            queries += 1;
        }
        for l in scene.lines() {
            let radius = rng.range(0.01, 0.1);
            let got = attach_nodes(&l.points, scene.nodes(), radius);
            let mut want: Vec<(f64, ObjectId, f64)> = Vec::new();
            let mut boundary = BTreeSet::new();
            for n in scene.nodes() {
                let (d, at, second) = brute_project(&l.points, n.pos);
                if (d - radius).abs() < EPS {
                    boundary.insert(n.id);
                } else if d <= radius {
                    want.push((at, n.id, second - d));
                }
            }
            let got: Vec<_> = got.into_iter().filter(|m| !boundary.contains(&m.node)).collect();
            let gs: BTreeSet<ObjectId> = got.iter().map(|m| m.node).collect();
            let ws: BTreeSet<ObjectId> = want.iter().map(|w| w.1).collect();
            ensure!(gs == ws, "scene {s}: attach_nodes {gs:?}, brute force {ws:?}");
            for m in &got {
                let w = want.iter().find(|w| w.1 == m.node).unwrap();
                ensure!(
                    (m.at - w.0).abs() < 1e-9 || w.2 < 1e-9,
                    "scene {s}: node {} at {} vs {}",
                    m.node,
                    m.at,
                    w.0
                );
            }
            ensure!(
                got.windows(2).all(|p| p[0].at <= p[1].at),
                "scene {s}: melody out of order"
            );
            attached += got.len();
        }
    }

    let mut sims = 0;
    for _ in 0..2000 {
        let a = random_polyline(&mut rng);
        let b = random_polyline(&mut rng);
        let (dx, dy) = (rng.range(-0.5, 0.5), rng.range(-0.5, 0.5));
        let moved: Vec<Vec2> = a.iter().map(|p| Vec2::new(p.x + dx, p.y + dy)).collect();
        match (line_similarity(&a, &a), line_similarity(&a, &moved)) {
            (Ok(same), Ok(shifted)) => {
                ensure!((same - 1.0).abs() < 1e-9, "identical copy scored {same}");
                ensure!((shifted - 1.0).abs() < 1e-9, "translated copy scored {shifted}");
            }
            (Err(_), Err(_)) => {}
            other => return Err(format!("inconsistent degeneracy: {other:?}")),
        }
        if let (Ok(ab), Ok(ba)) = (line_similarity(&a, &b), line_similarity(&b, &a)) {
            ensure!((ab - ba).abs() < 1e-12, "asymmetric: {ab} vs {ba}");
            ensure!((0.0..=1.0).contains(&ab), "out of range: {ab}");
        }
        // wild input: huge, tiny, repeated and non-finite points
        let junk: Vec<Vec2> = (0..1 + rng.index(6))
            .map(|_| match rng.index(5) {
                0 => Vec2::new(rng.range(-1e9, 1e9), rng.range(-1e9, 1e9)),
                1 => Vec2::new(1e-300 * rng.next_f64(), 0.0),
                2 => Vec2::new(0.5, 0.5),
                3 => Vec2::new(f64::NAN, rng.next_f64()),
                _ => Vec2::new(rng.next_f64(), rng.next_f64()),
            })
            .collect();
        if let Ok(v) = line_similarity(&junk, &a) {
            ensure!((0.0..=1.0).contains(&v), "junk scored {v}");
        }
        sims += 1;
    }
    Ok(format!(
        "{SCENES} scenes, {queries} hit queries, {attached} attachments, {sims} similarity cases"
    ))
}

// ------------------------------------------------------------ evolution modes

/// Unlocks the circles, then plays `pattern`: `true` is a dual-occupancy
/// episode, `false` has only player 1 on a circle.
fn occupancy(e: &mut Engine, pattern: &[bool]) -> Effects {
    let mut fx = Effects::default();
    let mut t = 1;
    for slot in [1u8, 2] {
        fx.extend(feed(
            e,
            &[hand(t, slot, 0.1 + 0.7 * (slot - 1) as f64, 0.9), brush(t, slot, true)],
        ));
        fx.extend(e.advance_to(t + 32));
        fx.extend(feed(e, &[brush(t + 32, slot, false)]));
        t += 40;
    }
    for &dual in pattern {
        fx.extend(feed(e, &[floor(t, 1, 0.3, 0.6)]));
        if dual {
            fx.extend(feed(e, &[floor(t + 3, 2, 0.7, 0.6)]));
        } else {
            fx.extend(feed(e, &[floor(t + 3, 2, 0.5, 0.9)]));
        }
        t += 60;
        fx.extend(feed(e, &[floor(t, 1, 0.5, 0.4), floor(t, 2, 0.5, 0.45)]));
        t += 160;
    }
    fx.extend(e.advance_to(t));
    fx
}

fn evolution_modes() -> Outcome {
    let patterns: [&[bool]; 4] = [
        &[true, true, true, true],
        &[true, false, true, false, false, true],
        &[false, false, false],
        &[true],
    ];
    for pattern in patterns {
        let episodes = pattern.iter().filter(|d| **d).count();
        let mut e = engine_with(EngineConfig::default());
        let fx = occupancy(&mut e, pattern);
        ensure!(
            fx.chord_changes.len() == episodes,
            "interactable: {} changes for {episodes} dual episodes",
            fx.chord_changes.len()
        );
        ensure!(
            fx.chord_changes.windows(2).all(|w| w[0].to == w[1].from),
            "changes do not chain"
        );

        let mut e = engine_with(EngineConfig {
            evolution_mode: EvolutionMode::Disabled,
            ..EngineConfig::default()
        });
        let fx = occupancy(&mut e, pattern);
        ensure!(
            fx.chord_changes.is_empty(),
            "disabled: {} changes",
            fx.chord_changes.len()
        );
    }
    let cfg = EngineConfig {
        evolution_mode: EvolutionMode::Automatic,
        ..EngineConfig::default()
    };
    let period = cfg.ticks(cfg.auto_evolution_seconds);
    let mut lengths = Vec::new();
    for t in [1, period - 1, period, period + 1, 2 * period, 7 * period + 13, 27_000] {
        let n = engine_with(cfg.clone()).advance_to(t).chord_changes.len();
        ensure!(
            n as u64 == t / period,
            "automatic: {n} changes in {t} ticks, expected {}",
            t / period
        );
        lengths.push(t);
    }
    let mut e = engine_with(cfg.clone());
    let fx = occupancy(&mut e, &[true, true, true]);
    ensure!(
        fx.chord_changes.len() as u64 == e.tick() / period,
        "automatic with players on circles: {} changes in {} ticks",
        fx.chord_changes.len(),
        e.tick()
    );
    Ok(format!(
        "interactable = dual episodes, disabled = 0, automatic = floor(T/{period}) for {lengths:?}"
    ))
}

// ---------------------------------------------------------- codec totality

fn sample_messages() -> Vec<Message> {
    let scn = random_scenario(5, 1500);
    let mut e = engine_with(EngineConfig::default());
    let start = e.scene().clone();
    let mut fx = e.initial_effects();
    for step in &scn.steps {
        let r = match &step.action {
            Action::Input(kind) => e.process_event(&InputEvent {
                tick: step.tick,
                kind: kind.clone(),
            }),
            Action::Control(cmd) => {
                e.advance_to(step.tick);
                e.apply_command(cmd)
            }
        };
        fx.extend(r.unwrap());
    }
    let mut bodies = vec![
        Body::Hello { role: Role::Sensor },
        Body::Hello { role: Role::Console },
        Body::StateDelta(delta::diff(&start, e.scene())),
        Body::StateDelta(delta::full(e.scene())),
        Body::Snapshot(Snapshot {
            scene: e.scene().clone(),
            hash: Digest(e.hash()),
        }),
        Body::HashCheck { hash: Digest(u64::MAX) },
        Body::Ack { seq: 42 },
        Body::Error {
            code: ErrorCode::OutOfSequence,
            message: "seq 3 after 7".into(),
        },
    ];
    bodies.extend(scn.steps.iter().take(200).map(|s| match &s.action {
        Action::Input(kind) => Body::Input(InputEvent {
            tick: s.tick,
            kind: kind.clone(),
        }),
        Action::Control(cmd) => Body::Control(cmd.clone()),
    }));
    bodies.push(Body::Input(InputEvent {
        tick: 1,
        kind: InputKind::SensorLost,
    }));
    bodies.extend(ControlCommand::examples().into_iter().map(Body::Control));
    bodies.extend(fx.notifications.iter().take(20).cloned().map(Body::Notification));
    bodies.extend(fx.devices.iter().take(20).cloned().map(Body::DeviceCommand));
    bodies.extend(fx.notes.iter().take(20).cloned().map(Body::NoteEvent));
    bodies
        .into_iter()
        .enumerate()
        .map(|(i, b)| Message::new(i as u64 + 1, i as u64 * 3, b))
        .collect()
}

fn codec_totality() -> Outcome {
    let msgs = sample_messages();
    let kinds: BTreeSet<&str> = msgs.iter().map(|m| m.body.kind()).collect();
    ensure!(kinds.len() == 11, "only {} kinds sampled: {kinds:?}", kinds.len());
    for m in &msgs {
        let line = encode_line(m);
        let back = decode(line.as_bytes()).map_err(|e| format!("{} failed to decode: {e}", m.body.kind()))?;
        ensure!(&back == m, "{} did not round-trip", m.body.kind());
    }

    const CASES: usize = 10_000;
    let mut rng = SceneRng::new(99);
    let encoded: Vec<Vec<u8>> = msgs.iter().map(|m| encode_line(m).into_bytes()).collect();
    let alphabet = b"{}[]\":,0123456789.-+eEtrufalsn \\\n\t\"kindbodyversionseqtick";
    let (mut panics, mut accepted) = (0, 0);
    let hook = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    for i in 0..CASES {
        let bytes: Vec<u8> = match i % 4 {
            0 => (0..rng.index(300)).map(|_| rng.next_u64() as u8).collect(),
            1 => (0..rng.index(300))
                .map(|_| alphabet[rng.index(alphabet.len())])
                .collect(),
            2 => {
                let mut b = encoded[rng.index(encoded.len())].clone();
                for _ in 0..1 + rng.index(4) {
                    let j = rng.index(b.len());
                    b[j] = rng.next_u64() as u8;
                }
                b
            }
            _ => {
                let b = &encoded[rng.index(encoded.len())];
                let cut = rng.index(b.len());
                let other = &encoded[rng.index(encoded.len())];
                let mut out = b[..cut].to_vec();
                out.extend_from_slice(&other[rng.index(other.len())..]);
                out
            }
        };
        match panic::catch_unwind(|| decode(&bytes).is_ok()) {
            Err(_) => panics += 1,
            Ok(true) => accepted += 1,
            Ok(false) => {}
        }
    }
    panic::set_hook(hook);
    ensure!(panics == 0, "{panics} decoder panics");
    Ok(format!(
        "{} messages over {} kinds round-trip; {CASES} fuzz inputs, 0 panics, {accepted} accepted",
        msgs.len(),
        kinds.len()
    ))
}

// --------------------------------------------------------------- cli contract

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn cli(args: &[&str]) -> (i32, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_musictraces"))
        .env_remove("MUSICTRACES_CONFIG")
        .args(args)
        .output()
        .expect("binary runs");
    (
        o.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&o.stdout).into_owned(),
    )
}

fn cli_contract() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let out = d.to_str().unwrap();
    let demo = scenarios_dir().join("demo.scn");
    let golden = fs::read_to_string(scenarios_dir().join("demo.hash")).map_err(|e| e.to_string())?;
    let golden = golden.trim();

    let (code, stdout) = cli(&["run", demo.to_str().unwrap(), "--out", out]);
    ensure!(code == 0, "demo run exited {code}");
    ensure!(
        stdout.lines().next() == Some(&format!("final_hash {golden}")),
        "demo hash: {stdout}"
    );
    let log = d.join("session.log");
    let (code, stdout) = cli(&["replay", log.to_str().unwrap()]);
    ensure!(code == 0 && stdout.contains(golden), "replay exited {code}: {stdout}");

    let text = fs::read_to_string(&log).unwrap();
    let mut parsed = SessionLog::parse(&text).unwrap();
    tamper(&mut parsed.records[0]);
    let bad = d.join("tampered.log");
    fs::write(&bad, parsed.to_text()).unwrap();
    let (code, _) = cli(&["replay", bad.to_str().unwrap()]);
    ensure!(code == 1, "tampered replay exited {code}");

    fs::write(&bad, &text[..text.len() / 2]).unwrap();
    let (code, _) = cli(&["replay", bad.to_str().unwrap()]);
    ensure!(code == 2, "truncated log exited {code}");
    let broken = d.join("broken.scn");
    fs::write(&broken, "@0 hand 1 half 0.5\n").unwrap();
    let (code, _) = cli(&["run", broken.to_str().unwrap()]);
    ensure!(code == 2, "malformed scenario exited {code}");

    let conf = d.join("bad.conf");
    fs::write(&conf, "tick_rate = 0\n").unwrap();
    let (code, _) = cli(&["run", demo.to_str().unwrap(), "--config", conf.to_str().unwrap()]);
    ensure!(code == 3, "invalid config exited {code}");
    Ok(format!("demo hash {golden}; exit codes 0/1/2/3 observed"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("determinism", determinism),
        ("markov", markov),
        ("chord_membership", chord_membership),
        ("dwell_threshold", dwell_threshold),
        ("idle_staging", idle_staging),
        ("playback_counts", playback_counts),
        ("geometry_oracles", geometry_oracles),
        ("evolution_modes", evolution_modes),
        ("codec_totality", codec_totality),
        ("cli_contract", cli_contract),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let ms = start.elapsed().as_millis();
        match result {
            Ok(detail) => println!("PASS {name:<18} {detail} ({ms} ms)"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name:<18} {why} ({ms} ms)");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
