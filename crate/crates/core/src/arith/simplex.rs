//! Bounded simplex over an exact ordered field, with backtrackable bounds.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{FromPrimitive, Signed, ToPrimitive};

/// Exact numbers the simplex computes with.
pub trait Scalar: Clone + Debug + Ord + Signed {
    fn from_int(v: i64) -> Self;
    fn floor_int(&self) -> Self;
    fn ceil_int(&self) -> Self;
    fn is_int(&self) -> bool;
    /// The value as an `i64` if it is an integer in range.
    fn to_i64_exact(&self) -> Option<i64>;
}

impl<T> Scalar for Ratio<T>
where
    T: Clone + Debug + Integer + Signed + FromPrimitive + ToPrimitive,
{
    fn from_int(v: i64) -> Self {
        Ratio::from_integer(T::from_i64(v).expect("i64 fits the integer type"))
    }

    fn floor_int(&self) -> Self {
        self.floor()
    }

    fn ceil_int(&self) -> Self {
        self.ceil()
    }

    fn is_int(&self) -> bool {
        self.is_integer()
    }

    fn to_i64_exact(&self) -> Option<i64> {
        if self.is_integer() {
            self.to_integer().to_i64()
        } else {
            None
        }
    }
}

/// Tableau `basic = Σ coeff·nonbasic` with a current assignment that keeps
/// every nonbasic variable within its bounds.
#[derive(Clone, Debug)]
pub struct Simplex<S: Scalar> {
    rows: Vec<Option<BTreeMap<usize, S>>>,
    cols: Vec<BTreeSet<usize>>,
    value: Vec<S>,
    lower: Vec<Option<S>>,
    upper: Vec<Option<S>>,
    trail: Vec<(usize, Option<S>, Option<S>)>,
    pivots: u64,
}

impl<S: Scalar> Simplex<S> {
    /// `n` unbounded variables, all nonbasic at zero.
    pub fn new(n: usize) -> Self {
        Simplex {
            rows: vec![None; n],
            cols: vec![BTreeSet::new(); n],
            value: vec![S::zero(); n],
            lower: vec![None; n],
            upper: vec![None; n],
            trail: Vec::new(),
            pivots: 0,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.value.len()
    }

    pub fn pivots(&self) -> u64 {
        self.pivots
    }

    /// Adds a variable defined as `Σ coeff·var`; returns its index.
    pub fn add_row(&mut self, coeffs: &BTreeMap<usize, i64>) -> usize {
        let s = self.num_vars();
        let mut row: BTreeMap<usize, S> = BTreeMap::new();
        let mut val = S::zero();
        for (&v, &c) in coeffs {
            let c = S::from_int(c);
            val = val + c.clone() * self.value[v].clone();
            match &self.rows[v] {
                Some(def) => {
                    for (k, a) in def.clone() {
                        add_into(&mut row, k, c.clone() * a);
                    }
                }
                None => add_into(&mut row, v, c),
            }
        }
        self.rows.push(None);
        self.cols.push(BTreeSet::new());
        self.value.push(val);
        self.lower.push(None);
        self.upper.push(None);
        for &k in row.keys() {
            self.cols[k].insert(s);
        }
        self.rows[s] = Some(row);
        s
    }

    pub fn value(&self, v: usize) -> &S {
        &self.value[v]
    }

    pub fn lower(&self, v: usize) -> Option<&S> {
        self.lower[v].as_ref()
    }

    pub fn upper(&self, v: usize) -> Option<&S> {
        self.upper[v].as_ref()
    }

    pub fn mark(&self) -> usize {
        self.trail.len()
    }

    /// Restores the bounds in force when `mark` was taken.
    pub fn backtrack(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let (v, l, u) = self.trail.pop().unwrap();
            self.lower[v] = l;
            self.upper[v] = u;
        }
    }

    /// Returns false if the new bound contradicts the other bound.
    pub fn assert_upper(&mut self, v: usize, c: S) -> bool {
        if self.upper[v].as_ref().is_some_and(|u| *u <= c) {
            return true;
        }
        if self.lower[v].as_ref().is_some_and(|l| *l > c) {
            return false;
        }
        self.trail.push((v, self.lower[v].clone(), self.upper[v].clone()));
        self.upper[v] = Some(c.clone());
        if self.rows[v].is_none() && self.value[v] > c {
            self.update(v, c);
        }
        true
    }

    pub fn assert_lower(&mut self, v: usize, c: S) -> bool {
        if self.lower[v].as_ref().is_some_and(|l| *l >= c) {
            return true;
        }
        if self.upper[v].as_ref().is_some_and(|u| *u < c) {
            return false;
        }
        self.trail.push((v, self.lower[v].clone(), self.upper[v].clone()));
        self.lower[v] = Some(c.clone());
        if self.rows[v].is_none() && self.value[v] < c {
            self.update(v, c);
        }
        true
    }

    fn update(&mut self, j: usize, v: S) {
        let delta = v.clone() - self.value[j].clone();
        for &r in &self.cols[j] {
            let a = self.rows[r].as_ref().unwrap()[&j].clone();
            self.value[r] = self.value[r].clone() + a * delta.clone();
        }
        self.value[j] = v;
    }

    fn below_upper(&self, v: usize) -> bool {
        self.upper[v].as_ref().is_none_or(|u| self.value[v] < *u)
    }

    fn above_lower(&self, v: usize) -> bool {
        self.lower[v].as_ref().is_none_or(|l| self.value[v] > *l)
    }

    /// Restores feasibility of the basic variables with Bland's rule.
    /// Returns false if the bounds are infeasible over the rationals.
    pub fn check(&mut self) -> bool {
        loop {
            let violated = (0..self.num_vars()).find_map(|b| {
                self.rows[b].as_ref()?;
                if let Some(l) = &self.lower[b] {
                    if self.value[b] < *l {
                        return Some((b, l.clone(), true));
                    }
                }
                if let Some(u) = &self.upper[b] {
                    if self.value[b] > *u {
                        return Some((b, u.clone(), false));
                    }
                }
                None
            });
            let Some((b, target, increase)) = violated else { return true };
            let row = self.rows[b].as_ref().unwrap();
            let entering = row.iter().find_map(|(&j, a)| {
                let up = a.is_positive() == increase;
                let movable = if up { self.below_upper(j) } else { self.above_lower(j) };
                movable.then_some(j)
            });
            let Some(j) = entering else { return false };
            self.pivot_and_update(b, j, target);
        }
    }

    fn pivot_and_update(&mut self, b: usize, j: usize, v: S) {
        let a = self.rows[b].as_ref().unwrap()[&j].clone();
        let theta = (v.clone() - self.value[b].clone()) / a;
        self.value[b] = v;
        self.value[j] = self.value[j].clone() + theta.clone();
        for &r in &self.cols[j] {
            if r != b {
                let c = self.rows[r].as_ref().unwrap()[&j].clone();
                self.value[r] = self.value[r].clone() + c * theta.clone();
            }
        }
        self.pivot(b, j);
    }

    fn pivot(&mut self, b: usize, j: usize) {
        self.pivots += 1;
        let row = self.rows[b].take().unwrap();
        for &k in row.keys() {
            self.cols[k].remove(&b);
        }
        let a = row[&j].clone();
        let mut new_row: BTreeMap<usize, S> = BTreeMap::new();
        new_row.insert(b, S::one() / a.clone());
        for (k, c) in row {
            if k != j {
                new_row.insert(k, -(c / a.clone()));
            }
        }
        let users: Vec<usize> = self.cols[j].iter().copied().collect();
        for r in users {
            let r_row = self.rows[r].as_mut().unwrap();
            let coef = r_row.remove(&j).unwrap();
            for (k, c) in &new_row {
                let entry = r_row.entry(*k).or_insert_with(S::zero);
                *entry = entry.clone() + coef.clone() * c.clone();
                if entry.is_zero() {
                    r_row.remove(k);
                    self.cols[*k].remove(&r);
                } else {
                    self.cols[*k].insert(r);
                }
            }
        }
        self.cols[j].clear();
        for &k in new_row.keys() {
            self.cols[k].insert(j);
        }
        self.rows[j] = Some(new_row);
    }
}

fn add_into<S: Scalar>(row: &mut BTreeMap<usize, S>, k: usize, c: S) {
    let entry = row.entry(k).or_insert_with(S::zero);
    *entry = entry.clone() + c;
    if entry.is_zero() {
        row.remove(&k);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::{BigRational, Rational64};

    fn feasible<S: Scalar>() {
        // x + y = s, s ≥ 3, x ≤ 1, y ≤ 1 is infeasible; y ≤ 2 is feasible
        let mut sx = Simplex::<S>::new(2);
        let s = sx.add_row(&BTreeMap::from([(0, 1), (1, 1)]));
        assert!(sx.assert_lower(s, S::from_int(3)));
        assert!(sx.assert_upper(0, S::from_int(1)));
        let mark = sx.mark();
        assert!(sx.assert_upper(1, S::from_int(1)));
        assert!(!sx.check());
        sx.backtrack(mark);
        assert!(sx.assert_upper(1, S::from_int(2)));
        assert!(sx.check());
        let sum = sx.value(0).clone() + sx.value(1).clone();
        assert_eq!(sum, sx.value(s).clone());
        assert!(sum >= S::from_int(3));
    }

    #[test]
    fn big_rationals() {
        feasible::<BigRational>();
    }

    #[test]
    fn small_rationals() {
        feasible::<Rational64>();
    }

    #[test]
    fn fractional_vertex() {
        // 2x = s, s = 1
        let mut sx = Simplex::<BigRational>::new(1);
        let s = sx.add_row(&BTreeMap::from([(0, 2)]));
        assert!(sx.assert_lower(s, BigRational::from_int(1)));
        assert!(sx.assert_upper(s, BigRational::from_int(1)));
        assert!(sx.check());
        assert!(!sx.value(0).is_int());
        assert_eq!(sx.value(0).floor_int(), BigRational::from_int(0));
        assert_eq!(sx.value(0).ceil_int(), BigRational::from_int(1));
    }

    #[test]
    fn conflicting_bounds() {
        let mut sx = Simplex::<BigRational>::new(1);
        assert!(sx.assert_lower(0, BigRational::from_int(2)));
        assert!(!sx.assert_upper(0, BigRational::from_int(1)));
    }
}
