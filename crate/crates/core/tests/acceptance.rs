//! One PASS/FAIL line per acceptance criterion. Exits non-zero when any fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stencilkit::cache::{layer_conditions, simulate_cache, BreakSize, Dimensionality, LcOptions, SimOptions};
use stencilkit::machine::{load_machine, resolve_machine, OverlapPolicy};
use stencilkit::models::{compose_ecm, convert, ecm_from_traffic, incore, invert, lup_per_cl, roofline, EcmTerms};
use stencilkit::stencil::{
    build_kernel, emit_c, interpret, reference_inputs, validate_blocking, BlockSpec, CoefficientStorage, ElementType,
    EmitOptions, GridDims, KernelIR, StencilKind, StencilSpec, Traversal, Weighting,
};
use stencilkit::workflow::{plan, run_workflow, PlanOptions, WorkflowOptions};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check, Duration);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn spec3(r: u32, kind: StencilKind, w: Weighting, s: CoefficientStorage) -> StencilSpec {
    StencilSpec::new(3, r, kind, w, s, ElementType::Float64).unwrap()
}

fn manifest(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn codegen_goldens() -> Check {
    let cases = [
        (
            "star3d_r1_homogeneous_constant",
            spec3(
                1,
                StencilKind::Star,
                Weighting::Homogeneous,
                CoefficientStorage::Constant,
            ),
            7,
            "1 scalar",
        ),
        (
            "star3d_r3_heterogeneous_constant",
            spec3(
                3,
                StencilKind::Star,
                Weighting::Heterogeneous,
                CoefficientStorage::Constant,
            ),
            19,
            "19 scalars",
        ),
        (
            "box3d_r1_heterogeneous_variable",
            spec3(
                1,
                StencilKind::Box,
                Weighting::Heterogeneous,
                CoefficientStorage::Variable,
            ),
            27,
            "27-component weight grid",
        ),
    ];
    for (name, spec, terms, coeffs) in cases {
        let k = build_kernel(&spec).map_err(|e| e.to_string())?;
        ensure(k.terms.len() == terms, || format!("{name}: {} terms", k.terms.len()))?;
        let structure = match &k.coefficients {
            stencilkit::stencil::Coefficients::Scalars(v) if v.len() == 1 => "1 scalar".to_string(),
            stencilkit::stencil::Coefficients::Scalars(v) => format!("{} scalars", v.len()),
            stencilkit::stencil::Coefficients::WeightGrid { components, .. } => {
                format!("{components}-component weight grid")
            }
        };
        ensure(structure == coeffs, || format!("{name}: {structure}"))?;
        let src = emit_c(&k, &EmitOptions::plain()).map_err(|e| e.to_string())?;
        let golden =
            std::fs::read_to_string(manifest(&format!("tests/goldens/{name}.c"))).map_err(|e| e.to_string())?;
        ensure(src == golden, || format!("{name}: source differs from golden"))?;
        let assign = std::fs::read_to_string(manifest(&format!("tests/goldens/{name}.assign.txt")))
            .map_err(|e| e.to_string())?;
        ensure(src.contains(&assign), || {
            format!("{name}: assignment differs from golden")
        })?;
    }
    Ok("terms 7/19/27, coefficient structures and 3 goldens match".into())
}

fn hsw_breaks() -> Check {
    let (m, _) = resolve_machine("hsw").map_err(|e| e.to_string())?;
    let k = build_kernel(&spec3(
        1,
        StencilKind::Star,
        Weighting::Homogeneous,
        CoefficientStorage::Constant,
    ))
    .map_err(|e| e.to_string())?;
    let dims = GridDims::cubic(&k.spec, 100);
    let (conds, _) = layer_conditions(&k, &m, &dims, LcOptions::default()).map_err(|e| e.to_string())?;
    let mut found = Vec::new();
    for (level, observed) in [("L1", 30.0), ("L2", 90.0), ("L3", 760.0)] {
        let c = conds
            .iter()
            .find(|c| c.level == level && c.dimensionality == Dimensionality::D3)
            .ok_or(format!("no {level} 3D condition"))?;
        let BreakSize::At(n) = c.break_size else {
            return Err(format!("{level} 3D break unbounded"));
        };
        let rel = (n as f64 - observed).abs() / observed;
        ensure(rel <= 0.10, || {
            format!("{level}: break {n} vs observed {observed} ({:.1}%)", rel * 100.0)
        })?;
        found.push(n.to_string());
    }
    Ok(format!("3D breaks {} within 10% of 30/90/760", found.join("/")))
}

fn lc_equals_simulator() -> Check {
    let m = load_machine(manifest("tests/fixtures/lc_oracle.toml")).map_err(|e| e.to_string())?;
    let options = SimOptions {
        fully_associative: true,
        ..SimOptions::default()
    };
    let mut worst = 0.0f64;
    let mut cases = 0;
    for kind in [StencilKind::Star, StencilKind::Box] {
        for r in [1, 2] {
            for w in [Weighting::Homogeneous, Weighting::Heterogeneous] {
                let k = build_kernel(&spec3(r, kind, w, CoefficientStorage::Constant)).map_err(|e| e.to_string())?;
                for n in [16, 24, 32, 48, 64] {
                    let dims = GridDims::cubic(&k.spec, n);
                    let (_, lc) = layer_conditions(&k, &m, &dims, LcOptions::default()).map_err(|e| e.to_string())?;
                    let sim = simulate_cache(&k, &m, &dims, options).map_err(|e| e.to_string())?;
                    for (p, s) in lc.links.iter().zip(&sim.traffic.links) {
                        let streams = (p.load_bytes_per_cl + p.store_bytes_per_cl) / 64.0;
                        let simulated = (s.load_bytes_per_cl + s.store_bytes_per_cl) / 64.0;
                        let dev = (streams - simulated).abs();
                        ensure(dev <= streams, || {
                            format!(
                                "{} N={n} {}: {streams} vs {simulated:.2} lines/CL",
                                k.spec.label(),
                                p.link
                            )
                        })?;
                        worst = worst.max(dev / streams);
                    }
                    cases += 1;
                }
            }
        }
    }
    Ok(format!(
        "{cases} (kernel, N) cases, worst deviation {worst:.2} lines per stream"
    ))
}

fn ecm_composition() -> Check {
    let t = EcmTerms::new(7.0, 7.0, 3.0, 6.0, 14.0);
    let intel = compose_ecm(t, OverlapPolicy::IntelNoOverlap)
        .map_err(|e| e.to_string())?
        .t_total;
    let zen = compose_ecm(t, OverlapPolicy::ZenPartialOverlap)
        .map_err(|e| e.to_string())?
        .t_total;
    ensure(intel == 30.0 && zen == 20.0, || format!("intel {intel}, zen {zen}"))?;

    let (m, _) = resolve_machine("hsw").map_err(|e| e.to_string())?;
    let k = build_kernel(&spec3(
        1,
        StencilKind::Star,
        Weighting::Homogeneous,
        CoefficientStorage::Constant,
    ))
    .map_err(|e| e.to_string())?;
    let t_comp = incore(&k, &m).map_err(|e| e.to_string())?.t_comp;
    let lup = lup_per_cl(&m, 8);
    for n in (10..=1020).step_by(10) {
        let (_, traffic) =
            layer_conditions(&k, &m, &GridDims::cubic(&k.spec, n), LcOptions::default()).map_err(|e| e.to_string())?;
        let ecm = ecm_from_traffic(&k, &m, &traffic).map_err(|e| e.to_string())?.t_total;
        let rl = roofline(&traffic, &m, t_comp, lup)
            .map_err(|e| e.to_string())?
            .cycles_per_cl;
        ensure(rl <= ecm, || format!("N={n}: roofline {rl} > ECM {ecm}"))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..10_000 {
        let v: [f64; 5] = std::array::from_fn(|_| rng.gen_range(0.0..100.0));
        let t = EcmTerms::new(v[0], v[1], v[2], v[3], v[4]);
        let i = compose_ecm(t, OverlapPolicy::IntelNoOverlap).unwrap().t_total;
        let z = compose_ecm(t, OverlapPolicy::ZenPartialOverlap).unwrap().t_total;
        let max = v.iter().cloned().fold(0.0, f64::max);
        let sum: f64 = v.iter().sum();
        ensure(max <= z && z <= i && i <= sum, || format!("{v:?}: zen {z}, intel {i}"))?;
    }
    Ok("30/20 cy/CL, roofline <= ECM over 102 sizes, 10^4 dominance samples".into())
}

fn sig3(x: f64) -> f64 {
    let e = x.abs().log10().floor() as i32 - 2;
    (x / 10f64.powi(e)).round() * 10f64.powi(e)
}

fn conversion_anchors() -> Check {
    let a = convert(40.0, 2.3e9, 8.0).map_err(|e| e.to_string())? / 1e6;
    let b = convert(20.0, 2.3e9, 8.0).map_err(|e| e.to_string())? / 1e6;
    ensure(sig3(a) == 460.0 && sig3(b) == 920.0, || format!("{a}, {b}"))?;
    let back = invert(460e6, 2.3e9, 8.0).map_err(|e| e.to_string())?;
    ensure(sig3(back) == 40.0, || format!("460 MLUP/s -> {back} cy/CL"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10_000 {
        let cy = rng.gen_range(0.01..1e4);
        let clock = rng.gen_range(1e8..6e9);
        let lup = [2.0, 4.0, 8.0, 16.0][rng.gen_range(0..4)];
        let round = invert(convert(cy, clock, lup).unwrap(), clock, lup).unwrap();
        ensure((round - cy).abs() <= 1e-12 * cy, || format!("{cy} -> {round}"))?;
    }
    Ok("40 <-> 460 and 20 <-> 920 MLUP/s at 2.3 GHz; 10^4 round trips".into())
}

fn random_kernel(rng: &mut ChaCha8Rng) -> KernelIR {
    let dims = rng.gen_range(2..=3);
    let kind = if rng.gen_bool(0.5) {
        StencilKind::Star
    } else {
        StencilKind::Box
    };
    let weighting = [
        Weighting::Homogeneous,
        Weighting::Heterogeneous,
        Weighting::Isotropic,
        Weighting::PointSymmetric,
    ][rng.gen_range(0..4)];
    let storage = if rng.gen_bool(0.5) {
        CoefficientStorage::Constant
    } else {
        CoefficientStorage::Variable
    };
    let element = if rng.gen_bool(0.5) {
        ElementType::Float32
    } else {
        ElementType::Float64
    };
    let spec = StencilSpec::new(dims, rng.gen_range(1..=2), kind, weighting, storage, element).unwrap();
    build_kernel(&spec).unwrap()
}

fn bitwise_equal(k: &KernelIR, dims: &GridDims, block: BlockSpec, seed: u64) -> Result<bool, String> {
    fn run<T: stencilkit::stencil::Element>(
        k: &KernelIR,
        dims: &GridDims,
        block: BlockSpec,
        seed: u64,
    ) -> Result<bool, String> {
        let inputs = reference_inputs::<T>(k, dims, seed);
        let naive = interpret(k, dims, &inputs, Traversal::Naive).map_err(|e| e.to_string())?;
        let blocked = interpret(k, dims, &inputs, Traversal::Blocked(block)).map_err(|e| e.to_string())?;
        Ok(naive
            .iter()
            .zip(&blocked)
            .all(|(x, y)| x.to_f64().to_bits() == y.to_f64().to_bits()))
    }
    match k.spec.element {
        ElementType::Float32 => run::<f32>(k, dims, block, seed),
        ElementType::Float64 => run::<f64>(k, dims, block, seed),
    }
}

fn traversal_invariance() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let mut done = 0;
    while done < 50 {
        let k = random_kernel(&mut rng);
        let r = k.spec.radius as usize;
        let edge = |rng: &mut ChaCha8Rng| rng.gen_range(2 * r + 2..=2 * r + 24);
        let element = k.spec.element.size_bytes();
        let dims = if k.spec.dimensions == 3 {
            GridDims::new_3d(edge(&mut rng), edge(&mut rng), edge(&mut rng), element)
        } else {
            GridDims::new_2d(edge(&mut rng), edge(&mut rng), element)
        };
        let block = BlockSpec::new(rng.gen_range(1..=24)).unwrap();
        if validate_blocking(&k, &dims, &block).is_err() {
            continue;
        }
        let seed = rng.gen();
        ensure(bitwise_equal(&k, &dims, block, seed)?, || {
            format!(
                "{} {dims:?} block {}: blocked result differs",
                k.spec.label(),
                block.size
            )
        })?;
        done += 1;
    }
    Ok("50 randomized (kernel, dims, block) cases bitwise identical".into())
}

fn workflow_determinism() -> Check {
    let spec = spec3(
        1,
        StencilKind::Star,
        Weighting::Homogeneous,
        CoefficientStorage::Constant,
    );
    let (m, text) = resolve_machine("toy").map_err(|e| e.to_string())?;
    let p = plan(&spec, &m, &PlanOptions::default()).map_err(|e| e.to_string())?;
    let options = WorkflowOptions {
        machine_source: Some(text),
        invocation: "stencilkit workflow --machine toy".into(),
        ..WorkflowOptions::default()
    };
    let mut snapshots: Vec<BTreeMap<String, Vec<u8>>> = Vec::new();
    for _ in 0..2 {
        let bundle = run_workflow(&p, &options).map_err(|e| e.to_string())?;
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        bundle.write_to(dir.path()).map_err(|e| e.to_string())?;
        let mut files = BTreeMap::new();
        for entry in std::fs::read_dir(dir.path()).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
            files.insert(path.file_name().unwrap().to_string_lossy().into_owned(), bytes);
        }
        snapshots.push(files);
    }
    let csv = String::from_utf8(snapshots[0]["report.csv"].clone()).map_err(|e| e.to_string())?;
    let header = "N^3,Benchmark cycl,ECM LC Tol,ECM LC Tnol,ECM LC Tl1l2,ECM LC Tl2l3,ECM LC Tl3mem,\
                  Roofline LC cycl,ECM CS Tol,ECM CS Tnol,ECM CS Tl1l2,ECM CS Tl2l3,ECM CS Tl3mem,Roofline CS cycl";
    ensure(csv.split("\r\n").next() == Some(header), || {
        format!("header {:?}", csv.lines().next())
    })?;
    ensure(snapshots[0] == snapshots[1], || {
        let differ: Vec<&String> = snapshots[0]
            .keys()
            .filter(|k| snapshots[1].get(*k) != snapshots[0].get(*k))
            .collect();
        format!("artifacts differ between runs: {differ:?}")
    })?;
    Ok(format!(
        "{} artifacts byte-identical across two runs, exact header",
        snapshots[0].len()
    ))
}

fn main() {
    let checks: [Criterion; 7] = [
        ("codegen goldens", codegen_goldens, Duration::from_secs(1)),
        ("HSW layer-condition breaks", hsw_breaks, Duration::from_secs(1)),
        (
            "layer conditions vs LRU simulator",
            lc_equals_simulator,
            Duration::from_secs(120),
        ),
        ("ECM composition", ecm_composition, Duration::from_secs(10)),
        ("unit conversion anchors", conversion_anchors, Duration::from_secs(1)),
        ("traversal invariance", traversal_invariance, Duration::from_secs(60)),
        (
            "workflow determinism and CSV schema",
            workflow_determinism,
            Duration::from_secs(30),
        ),
    ];
    let mut failed = 0;
    for (name, check, budget) in checks {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if took > budget => Err(format!("{detail}; took {took:.2?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} ({took:.2?})"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why} ({took:.2?})");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
