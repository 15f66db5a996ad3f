use certiscope_core::cs::*;
use std::time::Instant;

#[test]
fn timing_cs_trials() {
    let cfg = EnsembleConfig { p: 400, q: 100, s: 14, trials: 0, master_seed: 42, amplitude_law: AmplitudeLaw::UnitSigned };
    for s in [6usize, 14, 20, 24] {
        let c = cfg.with_sparsity(s);
        let t0 = Instant::now();
        let mut ident = 0;
        for t in 0..5u64 {
            let o = evaluate_trial(&c, t, true);
            if o.identifiable { ident += 1; }
        }
        println!("s={s}: 5 trials in {:?} ({} identifiable)", t0.elapsed(), ident);
    }
}
