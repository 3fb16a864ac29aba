//! Period groups `Γ = Σ ℤ(a_i + b_i λ)` of the real line, with exact
//! arithmetic on the coefficient pairs.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::TorusPoint;

/// Golden-ratio conjugate `(√5 − 1)/2`, the default rotation number.
pub const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// The real number `a + bλ`, kept as an exact pair of rationals.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PeriodValue {
    pub a: BigRational,
    pub b: BigRational,
}

impl PeriodValue {
    pub fn new(a: BigRational, b: BigRational) -> Self {
        Self { a, b }
    }

    pub fn from_ints(a: i64, b: i64) -> Self {
        Self::new(BigRational::from_integer(a.into()), BigRational::from_integer(b.into()))
    }

    /// `(an/ad) + (bn/bd) λ`.
    pub fn from_fractions(an: i64, ad: i64, bn: i64, bd: i64) -> Self {
        Self::new(
            BigRational::new(an.into(), ad.into()),
            BigRational::new(bn.into(), bd.into()),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn numeric(&self, lambda: f64) -> f64 {
        ratio_to_f64(&self.a) + ratio_to_f64(&self.b) * lambda
    }

    pub fn neg(&self) -> Self {
        Self::new(-self.a.clone(), -self.b.clone())
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(&self.a + &other.a, &self.b + &other.b)
    }

    pub fn scale(&self, k: &BigRational) -> Self {
        Self::new(&self.a * k, &self.b * k)
    }

    /// Returns `k` with `self = k · divisor` when `k` is an integer.
    pub fn integer_quotient(&self, divisor: &Self) -> Option<BigInt> {
        let k = rational_multiple(self, divisor)?;
        k.is_integer().then(|| k.to_integer())
    }
}

impl fmt::Display for PeriodValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}λ", self.a, self.b)
    }
}

#[derive(Serialize, Deserialize)]
struct PeriodRecord {
    a: String,
    b: String,
}

impl Serialize for PeriodValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PeriodRecord { a: self.a.to_string(), b: self.b.to_string() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PeriodValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = PeriodRecord::deserialize(d)?;
        let a = parse_rational(&rec.a).map_err(serde::de::Error::custom)?;
        let b = parse_rational(&rec.b).map_err(serde::de::Error::custom)?;
        Ok(Self::new(a, b))
    }
}

/// Accepts `p`, `p/q` and `-p/q`.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let parsed = BigRational::from_str(s);
    parsed.map_err(|_| Error::Parse(format!("not a rational number: {s:?}")))
}

fn ratio_to_f64(r: &BigRational) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

/// `k` with `v = k · d`, if the two coefficient vectors are parallel.
fn rational_multiple(v: &PeriodValue, d: &PeriodValue) -> Option<BigRational> {
    if d.is_zero() {
        return None;
    }
    let k = if !d.a.is_zero() { &v.a / &d.a } else { &v.b / &d.b };
    (&d.a * &k == v.a && &d.b * &k == v.b).then_some(k)
}

/// A finitely generated subgroup of the reals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodGroup {
    pub generators: Vec<PeriodValue>,
    pub lambda_numeric: f64,
}

impl PeriodGroup {
    /// Zero and repeated generators are dropped.
    pub fn new(generators: Vec<PeriodValue>, lambda_numeric: f64) -> Self {
        let mut kept: Vec<PeriodValue> = Vec::new();
        for g in generators {
            if !g.is_zero() && !kept.contains(&g) {
                kept.push(g);
            }
        }
        Self { generators: kept, lambda_numeric }
    }

    /// Reads a JSON array of `{"a":"p/q","b":"p/q"}` records.
    pub fn from_json(text: &str, lambda_numeric: f64) -> Result<Self> {
        let gens: Vec<PeriodValue> = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(Self::new(gens, lambda_numeric))
    }

    /// Dimension over ℚ of the span of the coefficient pairs.
    pub fn rational_rank(&self) -> usize {
        let Some(first) = self.generators.iter().find(|g| !g.is_zero()) else {
            return 0;
        };
        let independent = self
            .generators
            .iter()
            .any(|g| &first.a * &g.b - &first.b * &g.a != BigRational::zero());
        if independent {
            2
        } else {
            1
        }
    }
}

pub fn is_discrete(g: &PeriodGroup) -> bool {
    g.rational_rank() <= 1
}

/// The positive generator of a discrete, nontrivial period group.
pub fn cyclic_generator(g: &PeriodGroup) -> Result<PeriodValue> {
    let rank = g.rational_rank();
    if rank == 0 {
        return Err(Error::TrivialGroup);
    }
    if rank > 1 {
        return Err(Error::NotDiscrete { rank });
    }
    let dir = g.generators.iter().find(|v| !v.is_zero()).expect("rank 1 has a nonzero generator");
    let mut num = BigInt::zero();
    let mut den = BigInt::one();
    for v in &g.generators {
        let k = rational_multiple(v, dir).expect("rank 1 generators are parallel");
        num = num.gcd(k.numer());
        den = den.lcm(k.denom());
    }
    let mut gen = dir.scale(&BigRational::new(num, den));
    if gen.numeric(g.lambda_numeric) < 0.0 {
        gen = gen.neg();
    }
    Ok(gen)
}

/// Names of the three groups in the short exact sequence attached to the lift.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceDescription {
    pub kernel: String,
    pub middle: String,
    pub quotient: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LiftResult {
    pub discrete: bool,
    pub cyclic_generator: Option<PeriodValue>,
    /// ℤ-basis of the lattice of coefficient vectors `(a, b)`.
    #[serde(serialize_with = "serialize_basis")]
    pub lattice_basis: Option<Vec<[BigRational; 2]>>,
    pub torus_dimension: usize,
    pub sequence_description: SequenceDescription,
}

fn serialize_basis<S: serde::Serializer>(
    basis: &Option<Vec<[BigRational; 2]>>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    let strings: Option<Vec<[String; 2]>> =
        basis.as_ref().map(|b| b.iter().map(|[x, y]| [x.to_string(), y.to_string()]).collect());
    strings.serialize(s)
}

pub fn build_lift(g: &PeriodGroup) -> LiftResult {
    let rank = g.rational_rank();
    match rank {
        0 => LiftResult {
            discrete: true,
            cyclic_generator: None,
            lattice_basis: None,
            torus_dimension: 0,
            sequence_description: SequenceDescription {
                kernel: "0".into(),
                middle: "R".into(),
                quotient: "R".into(),
            },
        },
        1 => {
            let gen = cyclic_generator(g).expect("rank one group has a generator");
            LiftResult {
                discrete: true,
                sequence_description: SequenceDescription {
                    kernel: format!("Z·({gen})"),
                    middle: "R".into(),
                    quotient: "T^1".into(),
                },
                cyclic_generator: Some(gen),
                lattice_basis: None,
                torus_dimension: 1,
            }
        }
        r => {
            let basis = lattice_basis(&g.generators);
            LiftResult {
                discrete: false,
                cyclic_generator: None,
                lattice_basis: Some(basis),
                torus_dimension: r,
                sequence_description: SequenceDescription {
                    kernel: format!("R embedded along (1, {})", g.lambda_numeric),
                    middle: format!("T^{r}"),
                    quotient: "R / Γ".into(),
                },
            }
        }
    }
}

/// Hermite-style reduction of the integer lattice spanned by the coefficient
/// vectors (after clearing denominators). Assumes rank two.
fn lattice_basis(gens: &[PeriodValue]) -> Vec<[BigRational; 2]> {
    let mut scale = BigInt::one();
    for g in gens {
        scale = scale.lcm(g.a.denom()).lcm(g.b.denom());
    }
    let s = BigRational::from_integer(scale.clone());
    let mut rows: Vec<[BigInt; 2]> = gens
        .iter()
        .map(|g| [(&g.a * &s).to_integer(), (&g.b * &s).to_integer()])
        .collect();

    let mut pivot = reduce_column(&mut rows, 0);
    let mut second = BigInt::zero();
    for r in &rows {
        second = second.gcd(&r[1]);
    }
    if !second.is_zero() && !pivot[1].is_zero() {
        pivot[1] = pivot[1].mod_floor(&second);
    }
    let unscale = |x: BigInt| BigRational::new(x, scale.clone());
    vec![
        [unscale(pivot[0].clone()), unscale(pivot[1].clone())],
        [unscale(BigInt::zero()), unscale(second)],
    ]
}

/// Euclid on column `col`: returns a row whose entry is the gcd of the
/// column and leaves every remaining row with a zero there.
fn reduce_column(rows: &mut Vec<[BigInt; 2]>, col: usize) -> [BigInt; 2] {
    loop {
        rows.retain(|r| !(r[0].is_zero() && r[1].is_zero()));
        let nonzero: Vec<usize> = (0..rows.len()).filter(|&i| !rows[i][col].is_zero()).collect();
        if nonzero.len() <= 1 {
            let Some(&i) = nonzero.first() else {
                return [BigInt::zero(), BigInt::zero()];
            };
            let mut p = rows.remove(i);
            if p[col].is_negative() {
                p = [-p[0].clone(), -p[1].clone()];
            }
            return p;
        }
        let (imin, _) = nonzero
            .iter()
            .map(|&i| (i, rows[i][col].abs()))
            .min_by(|a, b| a.1.cmp(&b.1))
            .unwrap();
        let pivot = rows[imin].clone();
        for &i in &nonzero {
            if i != imin {
                let q = rows[i][col].div_floor(&pivot[col]);
                rows[i] = [&rows[i][0] - &q * &pivot[0], &rows[i][1] - &q * &pivot[1]];
            }
        }
    }
}

/// The dense line `t ↦ (t, λt)` in the torus.
pub fn iota_lambda(t: f64, lambda: f64) -> TorusPoint {
    TorusPoint::new(t, lambda * t)
}
