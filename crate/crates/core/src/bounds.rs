//! Closed-form bounds and parameter sweeps over them.

use std::fmt;

use num_rational::Ratio;
use rayon::prelude::*;

use crate::buffer;
use crate::constrate::{self, ConstRateConfig};
use crate::error::{Error, Result};
use crate::indexless;
use crate::staged;
use crate::twobit;

/// Exact non-negative rational, printed as `p/q` or as a plain integer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(Ratio<u64>);

impl Rational {
    pub fn new(numer: u64, denom: u64) -> Result<Self> {
        if denom == 0 {
            return Err(Error::InvalidConfig("zero denominator".into()));
        }
        Ok(Self(Ratio::new(numer, denom)))
    }

    pub fn integer(value: u64) -> Self {
        Self(Ratio::from_integer(value))
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    pub fn floor(&self) -> u64 {
        self.numer() / self.denom()
    }

    pub fn to_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom() == 1 {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

/// Best known lower bound on write deficiency, `(q - 1) min(n, k - 1) / 2`.
pub fn lower_bound_deficiency(n: u64, k: u64, q: u64) -> Rational {
    let num = q.saturating_sub(1) * n.min(k.saturating_sub(1));
    Rational::new(num, 2).expect("nonzero denominator")
}

/// Every tabulated formula.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    /// `(q - 1) min(n, k - 1) / 2`.
    LowerBound,
    /// Guaranteed writes of the two-bit code (`k = 2`, odd `q`).
    TwoBitWrites,
    /// Index-less deficiency bound plus partition leftovers.
    IndexlessDeficiency,
    /// Staged code with per-stage index cells.
    StagedPerStage,
    /// Staged code with stacked binary index cells.
    StagedStacked,
    /// Guaranteed writes of the constant-rate code.
    ConstRateWrites,
    /// Multi-cell buffer guarantee `(q - 1)(n - r)`.
    BufferWrites,
    /// Layer-copying buffer guarantee.
    BufferBaseline,
    /// Single-cell upper bound via cycle counting.
    SingleCellNew,
    /// Earlier single-cell upper bound.
    SingleCellOld,
    /// Earlier single-cell construction.
    SingleCellPrior,
}

impl Formula {
    pub const FLASH: [Formula; 6] = [
        Formula::LowerBound,
        Formula::TwoBitWrites,
        Formula::IndexlessDeficiency,
        Formula::StagedPerStage,
        Formula::StagedStacked,
        Formula::ConstRateWrites,
    ];
    pub const BUFFER_SINGLE: [Formula; 3] =
        [Formula::SingleCellNew, Formula::SingleCellOld, Formula::SingleCellPrior];
    pub const BUFFER_MULTI: [Formula; 2] = [Formula::BufferWrites, Formula::BufferBaseline];

    pub fn id(self) -> &'static str {
        match self {
            Formula::LowerBound => "lower_bound",
            Formula::TwoBitWrites => "twobit_writes",
            Formula::IndexlessDeficiency => "indexless_deficiency",
            Formula::StagedPerStage => "staged_per_stage",
            Formula::StagedStacked => "staged_stacked",
            Formula::ConstRateWrites => "constrate_writes",
            Formula::BufferWrites => "buffer_writes",
            Formula::BufferBaseline => "buffer_baseline",
            Formula::SingleCellNew => "new",
            Formula::SingleCellOld => "old",
            Formula::SingleCellPrior => "prior",
        }
    }

    /// Parameter names, in grid order.
    pub fn params(self) -> &'static [&'static str] {
        match self {
            Formula::LowerBound
            | Formula::TwoBitWrites
            | Formula::IndexlessDeficiency
            | Formula::StagedPerStage
            | Formula::StagedStacked
            | Formula::ConstRateWrites => &["n", "k", "q"],
            Formula::BufferWrites | Formula::BufferBaseline => &["n", "q", "r"],
            Formula::SingleCellNew | Formula::SingleCellOld | Formula::SingleCellPrior => &["q", "l", "r"],
        }
    }

    pub fn eval(self, args: &[u64]) -> Result<Rational> {
        if args.len() != self.params().len() {
            return Err(Error::InvalidConfig(format!(
                "{} takes {} parameters",
                self.id(),
                self.params().len()
            )));
        }
        let int = Rational::integer;
        match self {
            Formula::LowerBound | Formula::TwoBitWrites | Formula::IndexlessDeficiency
            | Formula::StagedPerStage | Formula::StagedStacked | Formula::ConstRateWrites => {
                let (n, k, q) = (args[0], args[1], args[2]);
                if q < 2 {
                    return Err(Error::InvalidConfig("q must be at least 2".into()));
                }
                match self {
                    Formula::LowerBound => Ok(lower_bound_deficiency(n, k, q)),
                    Formula::TwoBitWrites => {
                        if k != 2 || n < 2 {
                            return Err(Error::InvalidConfig("two-bit code needs k = 2 and n >= 2".into()));
                        }
                        twobit::guaranteed_writes_two_bit(n, q).map(int)
                    }
                    Formula::IndexlessDeficiency => Ok(int(
                        indexless::aux_deficiency_bound(k, q) + indexless::partition_leftover_bound(k, q),
                    )),
                    Formula::StagedPerStage | Formula::StagedStacked => {
                        if k < 2 {
                            return Err(Error::InvalidConfig("staged code needs k >= 2".into()));
                        }
                        Ok(int(if self == Formula::StagedPerStage {
                            staged::bound_th2(n, k, q)
                        } else {
                            staged::bound_main(n, k, q)
                        }))
                    }
                    _ => {
                        let cfg = ConstRateConfig::new(usize_of(n)?, usize_of(k)?, u32_of(q)?)?;
                        Ok(int(constrate::guaranteed_writes_constrate(&cfg)))
                    }
                }
            }
            Formula::BufferWrites | Formula::BufferBaseline => {
                let (n, q, r) = (args[0], args[1], args[2]);
                if q < 2 || r == 0 || n < 2 * r {
                    return Err(Error::InvalidConfig("needs q >= 2, r >= 1 and n >= 2r".into()));
                }
                Ok(int(if self == Formula::BufferWrites {
                    buffer::guaranteed_writes_buffer(n, q, r)
                } else {
                    buffer::baseline_writes(n, q, r)
                }))
            }
            Formula::SingleCellNew => buffer::bound_single_cell_new(args[0], args[1], args[2]).map(int),
            Formula::SingleCellOld => buffer::bound_single_cell_old(args[0], args[1], args[2]).map(int),
            Formula::SingleCellPrior => {
                if args[1] != 2 {
                    return Err(Error::InvalidConfig("the earlier construction is binary".into()));
                }
                buffer::prior_single_cell_writes(args[0], args[2]).map(int)
            }
        }
    }
}

impl std::str::FromStr for Formula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Formula::FLASH
            .iter()
            .chain(&Formula::BUFFER_SINGLE)
            .chain(&Formula::BUFFER_MULTI)
            .copied()
            .find(|f| f.id() == s)
            .ok_or_else(|| Error::Parse(format!("unknown formula `{s}`")))
    }
}

fn usize_of(v: u64) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::Overflow("parameter"))
}

fn u32_of(v: u64) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Overflow("parameter"))
}

/// One value list per parameter. Values are deduplicated and sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Grid {
    axes: Vec<Vec<u64>>,
}

impl Grid {
    pub fn new(axes: Vec<Vec<u64>>) -> Self {
        let axes = axes
            .into_iter()
            .map(|mut a| {
                a.sort_unstable();
                a.dedup();
                a
            })
            .collect();
        Self { axes }
    }

    pub fn axes(&self) -> &[Vec<u64>] {
        &self.axes
    }

    /// All points, last axis varying fastest.
    pub fn points(&self) -> Vec<Vec<u64>> {
        let mut points = vec![Vec::new()];
        for axis in &self.axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&v| {
                        let mut next = p.clone();
                        next.push(v);
                        next
                    })
                })
                .collect();
        }
        if self.axes.is_empty() {
            Vec::new()
        } else {
            points
        }
    }
}

/// Parses `4`, `2,3,5` or `3..=9` into a list of values.
pub fn parse_axis(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::Parse(format!("`{text}` is not a value, a list, or a range a..=b"));
    if let Some((a, b)) = text.split_once("..=") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    text.split(',')
        .map(|v| v.trim().parse::<u64>().map_err(|_| bad()))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepRow {
    pub inputs: Vec<u64>,
    /// The value, or the reason the point is invalid.
    pub value: std::result::Result<Rational, String>,
}

impl SweepRow {
    fn cell(&self) -> String {
        match &self.value {
            Ok(v) => v.to_string(),
            Err(_) => "error".into(),
        }
    }
}

/// Evaluates `formula` at every grid point, in grid order.
pub fn sweep(formula: Formula, grid: &Grid) -> Result<Vec<SweepRow>> {
    if !grid.axes().is_empty() && grid.axes().len() != formula.params().len() {
        return Err(Error::InvalidConfig(format!(
            "{} needs axes {:?}",
            formula.id(),
            formula.params()
        )));
    }
    Ok(grid
        .points()
        .into_par_iter()
        .map(|inputs| {
            let value = formula.eval(&inputs).map_err(|e| e.to_string());
            SweepRow { inputs, value }
        })
        .collect())
}

/// CSV with one column per parameter followed by one per formula. All
/// formulas must share the same parameters.
pub fn table_csv(formulas: &[Formula], grid: &Grid) -> Result<String> {
    let Some(first) = formulas.first() else {
        return Err(Error::InvalidConfig("no formulas to tabulate".into()));
    };
    if formulas.iter().any(|f| f.params() != first.params()) {
        return Err(Error::InvalidConfig("formulas take different parameters".into()));
    }
    let columns: Vec<Vec<SweepRow>> = formulas.iter().map(|&f| sweep(f, grid)).collect::<Result<_>>()?;
    let mut out = String::new();
    let header: Vec<&str> = first.params().iter().copied().chain(formulas.iter().map(|f| f.id())).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for (i, point) in grid.points().iter().enumerate() {
        let mut fields: Vec<String> = point.iter().map(u64::to_string).collect();
        fields.extend(columns.iter().map(|c| c[i].cell()));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lower_bound_examples() {
        assert_eq!(lower_bound_deficiency(16, 4, 8).to_string(), "21/2");
        assert_eq!(lower_bound_deficiency(16, 1, 8), Rational::integer(0));
        assert_eq!(lower_bound_deficiency(2, 100, 3).to_string(), "2");
    }

    #[test]
    fn sweep_examples() {
        let grid = Grid::new(vec![vec![4], vec![3, 2], vec![3]]);
        let rows = sweep(Formula::LowerBound, &grid).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].inputs, vec![4, 2, 3]);
        assert_eq!(rows[0].value, Ok(Rational::integer(1)));
        assert_eq!(rows[1].value, Ok(Rational::integer(2)));

        assert!(sweep(Formula::LowerBound, &Grid::default()).unwrap().is_empty());

        let rows = sweep(Formula::SingleCellNew, &Grid::new(vec![vec![8], vec![2], vec![2]])).unwrap();
        assert_eq!(rows[0].value, Ok(Rational::integer(3)));
    }

    #[test]
    fn invalid_points_are_marked() {
        let grid = Grid::new(vec![vec![2, 8], vec![2], vec![2]]);
        let rows = sweep(Formula::SingleCellNew, &grid).unwrap();
        assert!(rows[0].value.is_err());
        assert!(rows[1].value.is_ok());
        let csv = table_csv(&Formula::BUFFER_SINGLE, &grid).unwrap();
        assert_eq!(csv, "q,l,r,new,old,prior\n2,2,2,error,1,1\n8,2,2,3,5,4\n");
    }

    #[test]
    fn axis_parsing() {
        assert_eq!(parse_axis("4").unwrap(), vec![4]);
        assert_eq!(parse_axis("2, 3,5").unwrap(), vec![2, 3, 5]);
        assert_eq!(parse_axis("3..=5").unwrap(), vec![3, 4, 5]);
        assert!(parse_axis("5..=3").is_err());
        assert!(parse_axis("x").is_err());
    }

    #[test]
    fn formula_ids_round_trip() {
        for f in Formula::FLASH.iter().chain(&Formula::BUFFER_SINGLE).chain(&Formula::BUFFER_MULTI) {
            assert_eq!(f.id().parse::<Formula>().unwrap(), *f);
        }
    }

    proptest! {
        #[test]
        fn lower_bound_matches_definition(n in 0u64..100, k in 0u64..100, q in 2u64..50) {
            let v = lower_bound_deficiency(n, k, q);
            let m = if k == 0 { 0 } else { n.min(k - 1) };
            // 2v is an integer equal to (q - 1) m
            prop_assert_eq!(v.numer() * (2 / v.denom()), (q - 1) * m);
        }

        #[test]
        fn sweep_is_deterministic(qs in proptest::collection::vec(2u64..40, 0..6)) {
            let grid = Grid::new(vec![qs, vec![2, 3], vec![1, 2, 3]]);
            prop_assert_eq!(
                table_csv(&Formula::BUFFER_SINGLE, &grid).ok(),
                table_csv(&Formula::BUFFER_SINGLE, &grid).ok()
            );
        }
    }
}
