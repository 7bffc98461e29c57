use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use veil_core::anonymity::{check, AnonymityQuery, QueryKind};
use veil_core::dc::{build_dc_system, dc_spec_formulas, DcConfig, PAID};
use veil_core::logic::{valid_in, EvalContext};
use veil_core::AgentId;

fn bench_dc_build(c: &mut Criterion) {
    let mut group = c.benchmark_group("dc_build");
    for n in [3usize, 5, 7] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            let cfg = DcConfig::uniform(n, true);
            b.iter(|| build_dc_system(&cfg).unwrap());
        });
    }
    group.finish();
}

fn bench_dc_spec_check(c: &mut Criterion) {
    let mut group = c.benchmark_group("dc_spec_check");
    for n in [3usize, 5] {
        let cfg = DcConfig::uniform(n, true);
        let dc = build_dc_system(&cfg).unwrap();
        let formulas = dc_spec_formulas(&cfg);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| {
                let ctx = EvalContext::new(&dc.interpreted);
                formulas.iter().all(|f| valid_in(&ctx, f).unwrap().holds)
            });
        });
    }
    group.finish();
}

fn bench_conditional_check(c: &mut Criterion) {
    let cfg = DcConfig::uniform_priors(3, true);
    let dc = build_dc_system(&cfg).unwrap();
    let measure = dc.measure.as_ref().unwrap();
    c.bench_function("dc_conditional_check", |b| {
        b.iter(|| {
            let ctx = EvalContext::with_measure(&dc.interpreted, measure);
            let q = AnonymityQuery::new(
                QueryKind::Conditional,
                AgentId::new("0").unwrap(),
                PAID,
                AgentId::new("o").unwrap(),
            );
            check(&ctx, &q).unwrap().holds
        });
    });
}

fn bench_strong_anonymity(c: &mut Criterion) {
    use std::collections::BTreeSet;
    use veil_core::csp::{strong_anonymity_on, Event, Process};

    // a symmetric process: k performers, each trace one dotted event plus
    // padding, closed under performer interchange
    let mut group = c.benchmark_group("csp_strong_anonymity");
    for performers in [2usize, 4] {
        let renamed: BTreeSet<Event> = (0..performers)
            .map(|i| Event::new(format!("{i}.act")))
            .collect();
        let alphabet: BTreeSet<Event> = renamed
            .iter()
            .cloned()
            .chain([Event::new("x"), Event::new("y")])
            .collect();
        let traces: Vec<Vec<Event>> = renamed
            .iter()
            .flat_map(|dotted| {
                [
                    vec![Event::new("x"), dotted.clone(), Event::new("y")],
                    vec![dotted.clone(), Event::new("x"), Event::new("x")],
                ]
            })
            .collect();
        let process = Process::closed(alphabet, traces).unwrap();
        group.bench_with_input(
            BenchmarkId::from_parameter(performers),
            &performers,
            |b, _| {
                b.iter(|| strong_anonymity_on(&process, &renamed).unwrap().holds);
            },
        );
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_dc_build,
    bench_dc_spec_check,
    bench_conditional_check,
    bench_strong_anonymity
);
criterion_main!(benches);
