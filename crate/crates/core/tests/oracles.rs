//! Randomized checks against independent oracles.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ctrlsynth::cegis::sample_family;
use ctrlsynth::discretize::continuous_dc_gain;
use ctrlsynth::interval::interval_char_poly;
use ctrlsynth::*;

fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

fn to_f64(x: &Rational) -> f64 {
    num_traits::ToPrimitive::to_f64(x).unwrap()
}

/// Uniform rational in `[-bound, bound]` with denominator 10^4.
fn coeff(rng: &mut ChaCha8Rng, bound: i64) -> Rational {
    rat(rng.gen_range(-bound * 10_000..=bound * 10_000), 10_000)
}

fn poly_from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (i, a) in c.iter().enumerate() {
            next[i] += a;
            next[i + 1] -= a * r;
        }
        c = next;
    }
    c.iter().map(|z| z.re).collect()
}

fn exact(c: &[f64]) -> Poly {
    // six decimals keeps the roots close to the ones drawn
    Poly::new(c.iter().map(|x| rat((x * 1e6).round() as i64, 1_000_000)).collect())
}

#[test]
fn jury_agrees_with_root_oracle_on_random_polynomials() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mut checked, mut stable) = (0, 0);
    while checked < 3000 {
        let degree = rng.gen_range(1..=6);
        let s = Poly::new((0..=degree).map(|_| coeff(&mut rng, 2)).collect());
        if s.leading().is_zero() {
            continue;
        }
        let rho = root_oracle(&s);
        if (rho - 1.0).abs() < 1e-4 {
            continue;
        }
        let expected = if rho < 1.0 { JuryStatus::Stable } else { JuryStatus::Unstable };
        assert_eq!(jury_stable(&s).status, expected, "{s} with max root modulus {rho}");
        checked += 1;
        stable += (rho < 1.0) as usize;
    }
    assert!(stable > 0);
}

#[test]
fn jury_agrees_with_root_oracle_near_the_boundary() {
    // roots drawn with modulus in (0.5, 1.5) so both verdicts are common
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (mut checked, mut stable) = (0, 0);
    while checked < 2000 {
        let degree = rng.gen_range(1..=6);
        let mut roots = Vec::new();
        while roots.len() < degree {
            let r = rng.gen_range(0.5..1.5);
            if roots.len() + 2 <= degree && rng.gen_bool(0.5) {
                let z = Complex64::from_polar(r, rng.gen_range(0.0..std::f64::consts::PI));
                roots.push(z);
                roots.push(z.conj());
            } else {
                roots.push(Complex64::new(if rng.gen_bool(0.5) { r } else { -r }, 0.0));
            }
        }
        let s = exact(&poly_from_roots(&roots));
        let rho = root_oracle(&s);
        if (rho - 1.0).abs() < 1e-4 {
            continue;
        }
        let expected = if rho < 1.0 { JuryStatus::Stable } else { JuryStatus::Unstable };
        assert_eq!(jury_stable(&s).status, expected, "{s}");
        // positive scaling never changes the verdict
        assert_eq!(jury_stable(&s.scale(&rat(7, 3))).status, expected);
        checked += 1;
        stable += (rho < 1.0) as usize;
    }
    assert!(stable > 300 && stable < 1700, "{stable}");
}

fn interval(rng: &mut ChaCha8Rng) -> RationalInterval {
    let a = coeff(rng, 10);
    let b = coeff(rng, 10);
    if a <= b {
        RationalInterval::new(a, b).unwrap()
    } else {
        RationalInterval::new(b, a).unwrap()
    }
}

fn member(rng: &mut ChaCha8Rng, iv: &RationalInterval) -> Rational {
    let t = rat(rng.gen_range(0..=1000), 1000);
    iv.lo() + (iv.hi() - iv.lo()) * t
}

#[test]
fn interval_operations_contain_exact_results() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100_000 {
        let (a, b) = (interval(&mut rng), interval(&mut rng));
        let (x, y) = (member(&mut rng, &a), member(&mut rng, &b));
        assert!(a.add(&b).contains(&(&x + &y)));
        assert!(a.sub(&b).contains(&(&x - &y)));
        assert!(a.mul(&b).contains(&(&x * &y)));
        match a.div(&b) {
            Ok(q) => assert!(q.contains(&(&x / &y))),
            Err(_) => assert!(b.contains_zero()),
        }
    }
}

/// Random plant of the given orders whose denominator is monic and stable.
fn random_plant(rng: &mut ChaCha8Rng, num_order: usize, den_order: usize) -> TransferFunction {
    let roots: Vec<Complex64> = (0..den_order).map(|_| Complex64::new(rng.gen_range(-0.9..0.9), 0.0)).collect();
    let den = exact(&poly_from_roots(&roots));
    let num = Poly::new((0..=num_order).map(|_| coeff(rng, 1)).collect());
    TransferFunction::new(num, den).unwrap()
}

#[test]
fn interval_stable_families_have_stable_members() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let fmt = FixedPointFormat::new(8, 12).unwrap();
    let mut certified = 0;
    for _ in 0..300 {
        let den_order = rng.gen_range(1..=3);
        let num_order = rng.gen_range(0..=den_order);
        let g = random_plant(&mut rng, num_order, den_order);
        let delta = rat(rng.gen_range(0..=500), 1000 * rng.gen_range(1..=50));
        let family = PlantFamily::uniform(g, delta, fmt).unwrap();
        let c = Controller::quantized(&[coeff(&mut rng, 1)], &[rat(1, 1)], fmt, Rounding::Truncate).unwrap();
        let (num, den) = family_to_interval_poly(&family);
        let verdict = jury_stable_interval(&interval_char_poly(&c, &num, &den));
        if verdict.status != JuryStatus::Stable {
            continue;
        }
        certified += 1;
        for g in sample_family(&family, 100, rng.gen()) {
            let s = char_poly(&c, &g).unwrap();
            assert!(root_oracle(&s) < 1.0, "{g} escapes a certified family");
        }
    }
    assert!(certified > 50, "{certified}");
}

#[test]
fn family_enclosure_contains_vertices_and_grid_members() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let fmt = FixedPointFormat::new(8, 10).unwrap();
    for _ in 0..100 {
        let g = random_plant(&mut rng, 1, 2);
        let family = PlantFamily::uniform(g, rat(rng.gen_range(0..=500), 1000), fmt).unwrap();
        let (num, den) = family_to_interval_poly(&family);
        for g in sample_family(&family, 40, rng.gen()) {
            // a member whose leading numerator coefficient is zero has a shorter numerator
            let n = g.num().padded(num.coeffs().len());
            assert!(num.contains_poly(&n) && den.contains_poly(g.den()), "{g}");
        }
    }
}

fn continuous(num: &[Rational], den: &[Rational], t: Rational) -> ContinuousTF {
    ContinuousTF::new(Poly::new(num.to_vec()), Poly::new(den.to_vec()), t).unwrap()
}

#[test]
fn first_order_lag_matches_closed_form() {
    for t in [rat(1, 10), rat(2, 10), rat(1, 1)] {
        let g = zoh_discretize(&continuous(&[rat(1, 1)], &[rat(1, 1), rat(1, 1)], t.clone())).unwrap();
        let pole = (-to_f64(&t)).exp();
        assert_eq!(g.den().len(), 2);
        assert!((to_f64(&g.num().coeffs()[g.num().len() - 1]) - (1.0 - pole)).abs() < 1e-9);
        assert!((to_f64(&g.den().coeffs()[1]) + pole).abs() < 1e-9);
        assert_eq!(g.den().coeffs()[0], rat(1, 1));
    }
}

#[test]
fn zoh_preserves_dc_gain_and_maps_poles() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let n = rng.gen_range(1..=3);
        // distinct real poles in (-3, -0.1), two decimals
        let mut poles: Vec<i64> = Vec::new();
        while poles.len() < n {
            let p = -rng.gen_range(10..300);
            if poles.iter().all(|q| (q - p).abs() > 10) {
                poles.push(p);
            }
        }
        let den_f = poly_from_roots(&poles.iter().map(|p| Complex64::new(*p as f64 / 100.0, 0.0)).collect::<Vec<_>>());
        let den: Vec<Rational> = den_f.iter().map(|x| rat((x * 1e6).round() as i64, 1_000_000)).collect();
        let num: Vec<Rational> = (0..rng.gen_range(1..=n)).map(|_| coeff(&mut rng, 2)).collect();
        if num.iter().all(|c| c.is_zero()) {
            continue;
        }
        let t = rat(rng.gen_range(5..=100), 100);
        let g = continuous(&num, &den, t.clone());
        let d = zoh_discretize(&g).unwrap();

        let one = rat(1, 1);
        let dc = to_f64(&(d.num().eval(&one) / d.den().eval(&one)));
        let expected = to_f64(&continuous_dc_gain(&g).unwrap());
        assert!((dc - expected).abs() < 1e-9 * expected.abs().max(1.0), "{dc} vs {expected}");

        let s_poles = Poly::new(den.clone()).roots();
        let z_poles = d.den().roots();
        for p in s_poles {
            let mapped = (p * to_f64(&t)).exp();
            assert!(mapped.norm() < 1.0);
            let nearest = z_poles.iter().map(|z| (z - mapped).norm()).fold(f64::INFINITY, f64::min);
            assert!(nearest < 1e-9, "pole {p} maps to {mapped}, nearest {nearest}");
        }
    }
}

#[test]
fn unstable_continuous_poles_stay_unstable() {
    // 1 / ((s - 0.5)(s + 2))
    let den = [rat(1, 1), rat(3, 2), rat(-1, 1)];
    let d = zoh_discretize(&continuous(&[rat(1, 1)], &den, rat(1, 5))).unwrap();
    let outside = d.den().roots().iter().filter(|z| z.norm() > 1.0).count();
    assert_eq!(outside, 1);
}
