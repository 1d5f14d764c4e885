use catrank::coherence::{score_categories, MembershipProbability, ScoreOptions};
use catrank::data::{CategoryIndex, Dictionary};
use catrank::neighbors::{Closeness, NeighborMeta, NeighborSet};
use catrank::metrics::MetricKind;
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn binom(n: u64, k: u64) -> BigInt {
    (0..k).fold(BigInt::from(1), |acc, i| acc * BigInt::from(n - i) / BigInt::from(i + 1))
}

fn exact_tail(c: u64, g: u64, p: &BigRational) -> BigRational {
    let q = BigRational::from_integer(BigInt::from(1)) - p;
    (g..=c)
        .map(|i| BigRational::from_integer(binom(c, i)) * num_traits_pow(p, i) * num_traits_pow(&q, c - i))
        .fold(BigRational::from_integer(BigInt::from(0)), |a, b| a + b)
}

fn num_traits_pow(x: &BigRational, e: u64) -> BigRational {
    (0..e).fold(BigRational::from_integer(BigInt::from(1)), |acc, _| acc * x)
}

fn to_f64(x: &BigRational) -> f64 {
    // Scale to keep 60 significant bits before converting.
    let (num, den) = (x.numer().clone(), x.denom().clone());
    if num == BigInt::from(0) {
        return 0.0;
    }
    let shift = den.bits() as i64 - num.bits() as i64 + 64;
    let scaled = if shift >= 0 { (num << shift as usize) / den } else { num / (den << (-shift) as usize) };
    scaled.to_string().parse::<f64>().unwrap() * 2f64.powi(-(shift as i32))
}

#[test]
fn log_space_surprise_matches_rational_arithmetic() {
    for seed in 0..40u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(4..=30);
        let lists: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|i| {
                let k = rng.random_range(0..=6.min(n - 1));
                let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                let mut list = Vec::new();
                for r in 0..k {
                    let pick = rng.random_range(0..others.len());
                    list.push((others.swap_remove(pick), r as f64));
                }
                list
            })
            .collect();
        let meta = NeighborMeta {
            metric: MetricKind::L2,
            closeness: Closeness::Count { k: 6 },
            n_entities: n,
            directed: true,
            clamped: false,
        };
        let nb = NeighborSet::from_lists(lists.clone(), meta).unwrap();
        let n_cats = 4;
        let names: Dictionary = (0..n_cats).map(|c| format!("c{c}")).collect();
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|e| (0..n_cats).map(move |c| (e, c)))
            .filter(|_| rng.random_bool(0.4))
            .collect();
        let cats = CategoryIndex::from_assignments(n, names, pairs).unwrap();
        for probability in [MembershipProbability::Proportional, MembershipProbability::ExcludingSelf] {
            let opts = ScoreOptions { probability, ..Default::default() };
            let (scores, _) = score_categories(&nb, &cats, &opts).unwrap();
            for s in scores {
                let members = cats.members(s.category);
                let size = members.len() as i64;
                let p = match probability {
                    MembershipProbability::Proportional => BigRational::new(size.into(), (n as i64).into()),
                    MembershipProbability::ExcludingSelf => BigRational::new((size - 1).into(), (n as i64 - 1).into()),
                };
                let tails: Vec<BigRational> = members
                    .iter()
                    .filter(|&&e| !lists[e].is_empty())
                    .map(|&e| {
                        let c = lists[e].len() as u64;
                        let g = lists[e].iter().filter(|(j, _)| members.contains(j)).count() as u64;
                        exact_tail(c, g, &p)
                    })
                    .collect();
                let expect = if tails.is_empty() {
                    1.0
                } else {
                    let sum = tails.iter().fold(BigRational::from_integer(0.into()), |a, b| a + b);
                    to_f64(&(sum / BigRational::from_integer(BigInt::from(tails.len()))))
                };
                let rel = (s.surprise - expect).abs() / expect.abs().max(f64::MIN_POSITIVE);
                assert!(rel <= 1e-9, "seed {seed} category {}: {} vs {expect}", s.category, s.surprise);
                assert_eq!(s.n_observers_used, tails.len());
            }
        }
    }
}
