mod support;

use support::solver_oracle_case;

#[test]
fn solver_verdicts_match_oracles() {
    let mut positives = [0usize; 4];
    let cases = 60;
    for seed in 1000..1000 + cases {
        let case = solver_oracle_case(seed);
        assert!(case.all(), "seed {seed}: {}", case.detail);
        for (p, e) in positives.iter_mut().zip(case.expected) {
            *p += e as usize;
        }
    }
    // Both verdicts must occur for every check.
    for p in positives {
        assert!(p > 0 && p < cases as usize, "{positives:?}");
    }
}
