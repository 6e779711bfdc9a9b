use sisa_core::workloads::aggregate;
use sisa_sim::config::{Arch, Config};
use sisa_sim::models::{bundled_model, BUNDLED};
use sisa_sim::report::run_gemm;
use sisa_sim::sweep::{run_point, sweep, Workload};

#[test]
fn sisa_beats_reshaping_at_sixteen_rows() {
    let cfg = Config::bundled();
    let w = Workload::Model(bundled_model("qwen2.5-0.5b").unwrap());
    let s = run_point(&cfg, Arch::Sisa, &w, 16).unwrap();
    let r = run_point(&cfg, Arch::Redas, &w, 16).unwrap();
    let ratio = r.cycles as f64 / s.cycles as f64;
    assert!((2.0..=3.0).contains(&ratio), "{ratio}");
}

#[test]
fn model_point_is_the_weighted_sum_of_its_gemms() {
    let cfg = Config::bundled();
    let model = bundled_model("qwen2.5-7b").unwrap();
    let m = 40;
    let point = run_point(&cfg, Arch::Sisa, &Workload::Model(model.clone()), m).unwrap();
    let mut cycles = 0;
    let mut energy = 0.0;
    for (shape, w) in model.expand(m).unwrap() {
        let r = run_gemm(&cfg, Arch::Sisa, shape).unwrap();
        cycles += r.sim.cycles * w;
        energy += r.energy.total_j * w as f64;
    }
    assert_eq!(point.cycles, cycles);
    assert!((point.energy_j - energy).abs() <= 1e-12 * energy);
    assert_eq!(point.counters.mac_count, model.total_macs(m));
}

#[test]
fn aggregate_is_linear_and_order_free() {
    let cfg = Config::bundled();
    let model = bundled_model("qwen2.5-1.5b").unwrap();
    let runs: Vec<_> = model
        .expand(20)
        .unwrap()
        .into_iter()
        .map(|(s, w)| (run_gemm(&cfg, Arch::Sisa, s).unwrap(), w))
        .collect();
    let parts: Vec<_> = runs.iter().map(|(r, w)| (&r.sim, &r.energy, *w)).collect();
    let fwd = aggregate(20, &parts).unwrap();
    let mut rev = parts.clone();
    rev.reverse();
    let back = aggregate(20, &rev).unwrap();
    assert_eq!(fwd.cycles, back.cycles);
    assert_eq!(fwd.counters, back.counters);
    assert!((fwd.edp_js - back.edp_js).abs() <= 1e-12 * fwd.edp_js);

    // one result at weight 2 equals two copies at weight 1
    let (r, _) = &runs[0];
    let twice = aggregate(20, &[(&r.sim, &r.energy, 2)]).unwrap();
    let pair = aggregate(20, &[(&r.sim, &r.energy, 1), (&r.sim, &r.energy, 1)]).unwrap();
    assert_eq!(twice, pair);
}

#[test]
fn every_bundled_model_sweeps() {
    let cfg = Config::bundled();
    for (name, _) in BUNDLED {
        let w = Workload::Model(bundled_model(name).unwrap());
        let rows = sweep(&cfg, &w, &[1, 64, 150], &[Arch::Sisa, Arch::Tpu, Arch::Redas]).unwrap();
        assert_eq!(rows.len(), 9);
        assert!(rows.iter().all(|r| r.cycles > 0 && r.energy_j > 0.0));
        // SISA never loses to the monolithic array on cycles
        for pair in rows.chunks(3) {
            assert!(pair[0].cycles <= pair[1].cycles, "{name} m={}", pair[0].m);
        }
    }
}
