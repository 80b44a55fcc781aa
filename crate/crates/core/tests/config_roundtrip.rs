use cvbell::config::{McSection, RunConfig, SweepSection};
use cvbell::output::Format;
use cvbell::{Angles, SweepAxis};
use proptest::prelude::*;

fn axis() -> impl Strategy<Value = SweepAxis> {
    prop_oneof![Just(SweepAxis::Lambda), Just(SweepAxis::Eta), Just(SweepAxis::EtaBhd)]
}

prop_compose! {
    fn config()(
        lambda in proptest::option::of(0.0..0.99f64),
        eta in proptest::option::of(0.01..1.0f64),
        theta in proptest::option::of(-3.0..3.0f64),
        sweep in proptest::option::of((axis(), 0.0..0.5f64, 0.5..1.0f64, 2usize..200)),
        seed in any::<u64>(),
        events in 1u64..10_000_000,
        json in any::<bool>(),
    ) -> RunConfig {
        let mut c = RunConfig::default();
        c.params.lambda = lambda;
        c.params.eta = eta;
        c.params.angles = theta.map(|t| Angles { theta1: t, ..Angles::default() });
        c.sweep = sweep.map(|(axis, min, max, steps)| SweepSection { axis, min, max, steps });
        c.mc = McSection { seed, n_target_events: events, ..McSection::default() };
        c.output.format = if json { Format::Json } else { Format::Csv };
        c
    }
}

proptest! {
    #[test]
    fn effective_config_round_trips(c in config()) {
        let text = c.to_toml_string().unwrap();
        let back = RunConfig::from_toml_str(&text).unwrap();
        prop_assert_eq!(back, c);
    }
}
