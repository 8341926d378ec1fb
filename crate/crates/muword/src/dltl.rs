//! Data-LTL and FO² front-ends: direct semantics, translation into the
//! μ-calculus, the not-in-class modalities, and the FO² ↔ unary-DLTL
//! translations.

use crate::dataword::DataWord;
use crate::evaluator::PosSet;
use crate::formula::{Atom0, Dir, Formula, Mod1, Mode};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DltlError {
    #[error("unbound variable {0}")]
    Unbound(String),
    #[error("free variables must be contained in {{x}}")]
    FreeVariables,
    #[error("operator {0} is not in the unary fragment")]
    NotUnary(&'static str),
    #[error("parse error at {0}: {1}")]
    Parse(usize, String),
}

// ---------------------------------------------------------------------------
// Data-LTL
// ---------------------------------------------------------------------------

/// The four derived modalities quantifying over positions outside the
/// current class: far-future (j > i+1), deep-past (j < i-1), future (j > i)
/// and past (j < i).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum FarKind {
    FarFuture,
    DeepPast,
    Future,
    Past,
}

/// Basic Data-LTL with full negation, plus the reflexive F/P modalities of
/// the unary fragment and the not-in-class modalities (primitives here,
/// eliminable into the plain unary fragment by `expand_far`).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Dltl {
    True,
    False,
    Prop(String),
    S,
    P,
    Not(Box<Dltl>),
    And(Box<Dltl>, Box<Dltl>),
    Or(Box<Dltl>, Box<Dltl>),
    M1(Mod1, Box<Dltl>),
    /// reflexive future (global or within the class)
    F(Mode, Box<Dltl>),
    /// reflexive past
    Pst(Mode, Box<Dltl>),
    /// somewhere outside the class, in the given direction and range
    Far(FarKind, Box<Dltl>),
    Until(Mode, Box<Dltl>, Box<Dltl>),
    Since(Mode, Box<Dltl>, Box<Dltl>),
}

fn dand(a: Dltl, b: Dltl) -> Dltl {
    Dltl::And(Box::new(a), Box::new(b))
}

fn dor(a: Dltl, b: Dltl) -> Dltl {
    Dltl::Or(Box::new(a), Box::new(b))
}

fn dnot(a: Dltl) -> Dltl {
    Dltl::Not(Box::new(a))
}

fn dm(m: Mod1, a: Dltl) -> Dltl {
    Dltl::M1(m, Box::new(a))
}

fn dbig_or(mut v: Vec<Dltl>) -> Dltl {
    match v.len() {
        0 => Dltl::False,
        1 => v.pop().unwrap(),
        _ => {
            let last = v.pop().unwrap();
            dor(dbig_or(v), last)
        }
    }
}

impl Dltl {
    /// No binary modalities anywhere.
    pub fn is_unary(&self) -> bool {
        match self {
            Dltl::Until(..) | Dltl::Since(..) => false,
            Dltl::Not(a) | Dltl::M1(_, a) | Dltl::F(_, a) | Dltl::Pst(_, a)
            | Dltl::Far(_, a) => a.is_unary(),
            Dltl::And(a, b) | Dltl::Or(a, b) => a.is_unary() && b.is_unary(),
            _ => true,
        }
    }

    /// Maximum nesting of modalities (F, P and the not-in-class modalities
    /// count as one each).
    pub fn modal_depth(&self) -> usize {
        match self {
            Dltl::M1(_, a) | Dltl::F(_, a) | Dltl::Pst(_, a) | Dltl::Far(_, a) => {
                1 + a.modal_depth()
            }
            Dltl::Until(_, a, b) | Dltl::Since(_, a, b) => {
                1 + a.modal_depth().max(b.modal_depth())
            }
            Dltl::Not(a) => a.modal_depth(),
            Dltl::And(a, b) | Dltl::Or(a, b) => a.modal_depth().max(b.modal_depth()),
            _ => 0,
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Dltl::Not(a) | Dltl::M1(_, a) | Dltl::F(_, a) | Dltl::Pst(_, a)
            | Dltl::Far(_, a) => 1 + a.size(),
            Dltl::And(a, b) | Dltl::Or(a, b) => 1 + a.size() + b.size(),
            Dltl::Until(_, a, b) | Dltl::Since(_, a, b) => 1 + a.size() + b.size(),
            _ => 1,
        }
    }
}

fn set_where(n: usize, mut pred: impl FnMut(usize) -> bool) -> PosSet {
    let ps: Vec<usize> = (1..=n).filter(|&i| pred(i)).collect();
    PosSet::from_positions(n, &ps)
}

/// Brute-force evaluation: the set of positions satisfying φ.
pub fn eval_dltl(w: &DataWord, phi: &Dltl) -> PosSet {
    let n = w.len();
    match phi {
        Dltl::True => PosSet::full(n),
        Dltl::False => PosSet::empty(n),
        Dltl::Prop(p) => set_where(n, |i| w.letter(i) == p),
        Dltl::S => set_where(n, |i| w.one_type(i).unwrap().succ),
        Dltl::P => set_where(n, |i| w.one_type(i).unwrap().pred),
        Dltl::Not(a) => eval_dltl(w, a).complement(),
        Dltl::And(a, b) => eval_dltl(w, a).intersect(&eval_dltl(w, b)),
        Dltl::Or(a, b) => eval_dltl(w, a).union(&eval_dltl(w, b)),
        Dltl::M1(m, a) => {
            let s = eval_dltl(w, a);
            set_where(n, |i| {
                let j = match (m.dir, m.mode) {
                    (Dir::X, Mode::Global) => (i < n).then_some(i + 1),
                    (Dir::Y, Mode::Global) => (i > 1).then_some(i - 1),
                    (Dir::X, Mode::Class) => w.class_successor(i).unwrap(),
                    (Dir::Y, Mode::Class) => w.class_predecessor(i).unwrap(),
                };
                j.is_some_and(|j| s.contains(j))
            })
        }
        Dltl::F(m, a) => eval_until(w, *m, &Dltl::True, a, Dir::X),
        Dltl::Pst(m, a) => eval_until(w, *m, &Dltl::True, a, Dir::Y),
        Dltl::Far(k, a) => {
            let s = eval_dltl(w, a);
            set_where(n, |i| {
                (1..=n).any(|j| {
                    let range = match k {
                        FarKind::FarFuture => j > i + 1,
                        FarKind::DeepPast => j + 1 < i,
                        FarKind::Future => j > i,
                        FarKind::Past => j < i,
                    };
                    range && w.value(j) != w.value(i) && s.contains(j)
                })
            })
        }
        Dltl::Until(m, a, b) => eval_until(w, *m, a, b, Dir::X),
        Dltl::Since(m, a, b) => eval_until(w, *m, a, b, Dir::Y),
    }
}

/// φ U ψ along the global or class order (Since when dir = Y); ψ may hold
/// at the current position itself.
fn eval_until(w: &DataWord, mode: Mode, phi: &Dltl, psi: &Dltl, dir: Dir) -> PosSet {
    let n = w.len();
    let sp = eval_dltl(w, phi);
    let sq = eval_dltl(w, psi);
    let step = |j: usize| match (dir, mode) {
        (Dir::X, Mode::Global) => (j < n).then_some(j + 1),
        (Dir::Y, Mode::Global) => (j > 1).then_some(j - 1),
        (Dir::X, Mode::Class) => w.class_successor(j).unwrap(),
        (Dir::Y, Mode::Class) => w.class_predecessor(j).unwrap(),
    };
    set_where(n, |i| {
        let mut j = i;
        loop {
            if sq.contains(j) {
                return true;
            }
            if !sp.contains(j) {
                return false;
            }
            match step(j) {
                Some(k) => j = k,
                None => return false,
            }
        }
    })
}

/// Translation into the μ-calculus; negation handled by dualization (every
/// translated subformula is closed).
pub fn dltl_to_mu(phi: &Dltl) -> Formula {
    fn go(phi: &Dltl, fresh: &mut usize) -> Formula {
        let unfold = |mode: Mode, dir: Dir, a: Formula, b: Formula, fresh: &mut usize| {
            *fresh += 1;
            let x = format!("d{fresh}");
            Formula::Mu(
                x.clone(),
                Box::new(crate::formula::or(
                    b,
                    crate::formula::and(
                        a,
                        crate::formula::md(Mod1 { dir, mode }, Formula::Var(x)),
                    ),
                )),
            )
        };
        match phi {
            Dltl::True => Formula::True,
            Dltl::False => Formula::False,
            Dltl::Prop(p) => Formula::Prop(p.clone()),
            Dltl::S => Formula::Atom(Atom0::S),
            Dltl::P => Formula::Atom(Atom0::P),
            Dltl::Not(a) => go(a, fresh).dualize().expect("closed formula dualizes"),
            Dltl::And(a, b) => crate::formula::and(go(a, fresh), go(b, fresh)),
            Dltl::Or(a, b) => crate::formula::or(go(a, fresh), go(b, fresh)),
            Dltl::M1(m, a) => crate::formula::md(*m, go(a, fresh)),
            Dltl::F(m, a) => {
                let b = go(a, fresh);
                unfold(*m, Dir::X, Formula::True, b, fresh)
            }
            Dltl::Pst(m, a) => {
                let b = go(a, fresh);
                unfold(*m, Dir::Y, Formula::True, b, fresh)
            }
            Dltl::Far(k, a) => go(&expand_not_in_class(*k, a), fresh),
            Dltl::Until(m, a, b) => {
                let (fa, fb) = (go(a, fresh), go(b, fresh));
                unfold(*m, Dir::X, fa, fb, fresh)
            }
            Dltl::Since(m, a, b) => {
                let (fa, fb) = (go(a, fresh), go(b, fresh));
                unfold(*m, Dir::Y, fa, fb, fresh)
            }
        }
    }
    go(phi, &mut 0).alpha_normalize()
}

// ---------------------------------------------------------------------------
// Not-in-class modalities
// ---------------------------------------------------------------------------

/// Expand a not-in-class modality into the unary fragment. The far-future
/// expansion distinguishes whether the last φ-position is in the current
/// class; deep-past is the mirror image.
pub fn expand_not_in_class(kind: FarKind, phi: &Dltl) -> Dltl {
    use crate::formula::{XG, YG};
    use Dltl::*;
    match kind {
        FarKind::Future => dor(
            dand(dnot(S), dm(XG, phi.clone())),
            expand_not_in_class(FarKind::FarFuture, phi),
        ),
        FarKind::Past => dor(
            dand(dnot(P), dm(YG, phi.clone())),
            expand_not_in_class(FarKind::DeepPast, phi),
        ),
        FarKind::FarFuture => {
            // the last position satisfying φ (F is reflexive, so "strictly
            // later" needs the Xg shift)
            let last = dand(phi.clone(), dnot(dm(XG, F(Mode::Global, Box::new(phi.clone())))));
            let beyond = |f: Dltl| dm(XG, dm(XG, F(Mode::Global, Box::new(f))));
            dor(
                dand(beyond(last.clone()), dnot(F(Mode::Class, Box::new(last.clone())))),
                dand(
                    F(Mode::Class, Box::new(last.clone())),
                    beyond(dand(phi.clone(), dnot(F(Mode::Class, Box::new(last))))),
                ),
            )
        }
        FarKind::DeepPast => {
            let first = dand(phi.clone(), dnot(dm(YG, Pst(Mode::Global, Box::new(phi.clone())))));
            let before = |f: Dltl| dm(YG, dm(YG, Pst(Mode::Global, Box::new(f))));
            dor(
                dand(before(first.clone()), dnot(Pst(Mode::Class, Box::new(first.clone())))),
                dand(
                    Pst(Mode::Class, Box::new(first.clone())),
                    before(dand(phi.clone(), dnot(Pst(Mode::Class, Box::new(first))))),
                ),
            )
        }
    }
}

/// Eliminate every not-in-class modality, bottom-up.
pub fn expand_far(phi: &Dltl) -> Dltl {
    use Dltl::*;
    match phi {
        Far(k, a) => expand_not_in_class(*k, &expand_far(a)),
        Not(a) => dnot(expand_far(a)),
        And(a, b) => dand(expand_far(a), expand_far(b)),
        Or(a, b) => dor(expand_far(a), expand_far(b)),
        M1(m, a) => dm(*m, expand_far(a)),
        F(m, a) => F(*m, Box::new(expand_far(a))),
        Pst(m, a) => Pst(*m, Box::new(expand_far(a))),
        Until(m, a, b) => Until(*m, Box::new(expand_far(a)), Box::new(expand_far(b))),
        Since(m, a, b) => Since(*m, Box::new(expand_far(a)), Box::new(expand_far(b))),
        leaf => leaf.clone(),
    }
}

// ---------------------------------------------------------------------------
// FO²
// ---------------------------------------------------------------------------

/// The two variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum V {
    X,
    Y,
}

impl V {
    pub fn other(self) -> V {
        if self == V::X { V::Y } else { V::X }
    }
    pub fn name(self) -> &'static str {
        if self == V::X { "x" } else { "y" }
    }
}

/// FO² over <, +1, class successor and class order; x~y is definable from
/// these.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Fo2 {
    Letter(String, V),
    Eq(V, V),
    Lt(V, V),
    Succ(V, V),
    CSucc(V, V),
    CLt(V, V),
    Not(Box<Fo2>),
    And(Box<Fo2>, Box<Fo2>),
    Or(Box<Fo2>, Box<Fo2>),
    Exists(V, Box<Fo2>),
    Forall(V, Box<Fo2>),
}

fn fand(a: Fo2, b: Fo2) -> Fo2 {
    Fo2::And(Box::new(a), Box::new(b))
}

fn for_(a: Fo2, b: Fo2) -> Fo2 {
    Fo2::Or(Box::new(a), Box::new(b))
}

fn fnot(a: Fo2) -> Fo2 {
    Fo2::Not(Box::new(a))
}

impl Fo2 {
    pub fn free_vars(&self) -> BTreeSet<V> {
        match self {
            Fo2::Letter(_, v) => [*v].into(),
            Fo2::Eq(u, v) | Fo2::Lt(u, v) | Fo2::Succ(u, v) | Fo2::CSucc(u, v)
            | Fo2::CLt(u, v) => [*u, *v].into(),
            Fo2::Not(a) => a.free_vars(),
            Fo2::And(a, b) | Fo2::Or(a, b) => {
                a.free_vars().union(&b.free_vars()).copied().collect()
            }
            Fo2::Exists(v, a) | Fo2::Forall(v, a) => {
                let mut s = a.free_vars();
                s.remove(v);
                s
            }
        }
    }

    pub fn quantifier_depth(&self) -> usize {
        match self {
            Fo2::Not(a) => a.quantifier_depth(),
            Fo2::And(a, b) | Fo2::Or(a, b) => {
                a.quantifier_depth().max(b.quantifier_depth())
            }
            Fo2::Exists(_, a) | Fo2::Forall(_, a) => 1 + a.quantifier_depth(),
            _ => 0,
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Fo2::Not(a) | Fo2::Exists(_, a) | Fo2::Forall(_, a) => 1 + a.size(),
            Fo2::And(a, b) | Fo2::Or(a, b) => 1 + a.size() + b.size(),
            _ => 1,
        }
    }

    /// Swap the two variables everywhere (bound and free).
    fn swap(&self) -> Fo2 {
        let s = |v: &V| v.other();
        match self {
            Fo2::Letter(a, v) => Fo2::Letter(a.clone(), s(v)),
            Fo2::Eq(u, v) => Fo2::Eq(s(u), s(v)),
            Fo2::Lt(u, v) => Fo2::Lt(s(u), s(v)),
            Fo2::Succ(u, v) => Fo2::Succ(s(u), s(v)),
            Fo2::CSucc(u, v) => Fo2::CSucc(s(u), s(v)),
            Fo2::CLt(u, v) => Fo2::CLt(s(u), s(v)),
            Fo2::Not(a) => fnot(a.swap()),
            Fo2::And(a, b) => fand(a.swap(), b.swap()),
            Fo2::Or(a, b) => for_(a.swap(), b.swap()),
            Fo2::Exists(v, a) => Fo2::Exists(s(v), Box::new(a.swap())),
            Fo2::Forall(v, a) => Fo2::Forall(s(v), Box::new(a.swap())),
        }
    }
}

/// Brute-force FO² evaluation under a (partial) assignment.
pub fn eval_fo2(
    w: &DataWord,
    phi: &Fo2,
    asg: &BTreeMap<V, usize>,
) -> Result<bool, DltlError> {
    let pos = |v: &V| {
        asg.get(v)
            .copied()
            .ok_or_else(|| DltlError::Unbound(v.name().to_string()))
    };
    Ok(match phi {
        Fo2::Letter(a, v) => w.letter(pos(v)?) == a,
        Fo2::Eq(u, v) => pos(u)? == pos(v)?,
        Fo2::Lt(u, v) => pos(u)? < pos(v)?,
        Fo2::Succ(u, v) => pos(u)? + 1 == pos(v)?,
        Fo2::CSucc(u, v) => w.class_successor(pos(u)?).unwrap() == Some(pos(v)?),
        Fo2::CLt(u, v) => {
            let (i, j) = (pos(u)?, pos(v)?);
            i < j && w.value(i) == w.value(j)
        }
        Fo2::Not(a) => !eval_fo2(w, a, asg)?,
        Fo2::And(a, b) => eval_fo2(w, a, asg)? && eval_fo2(w, b, asg)?,
        Fo2::Or(a, b) => eval_fo2(w, a, asg)? || eval_fo2(w, b, asg)?,
        Fo2::Exists(v, a) => {
            let mut asg = asg.clone();
            let mut found = false;
            for i in 1..=w.len() {
                asg.insert(*v, i);
                if eval_fo2(w, a, &asg)? {
                    found = true;
                    break;
                }
            }
            found
        }
        Fo2::Forall(v, a) => {
            let mut asg = asg.clone();
            let mut ok = true;
            for i in 1..=w.len() {
                asg.insert(*v, i);
                if !eval_fo2(w, a, &asg)? {
                    ok = false;
                    break;
                }
            }
            ok
        }
    })
}

// ---------------------------------------------------------------------------
// unary-DLTL → FO²
// ---------------------------------------------------------------------------

/// The standard translation; the two variables alternate with the modal
/// depth, so the quantifier depth equals the modal depth.
pub fn udltl_to_fo2(phi: &Dltl) -> Result<Fo2, DltlError> {
    fn go(phi: &Dltl, v: V) -> Result<Fo2, DltlError> {
        let u = v.other();
        let modal = |rel: Fo2, a: &Dltl| -> Result<Fo2, DltlError> {
            Ok(Fo2::Exists(u, Box::new(fand(rel, go(a, u)?))))
        };
        Ok(match phi {
            Dltl::True => for_(Fo2::Eq(v, v), fnot(Fo2::Eq(v, v))),
            Dltl::False => fand(Fo2::Eq(v, v), fnot(Fo2::Eq(v, v))),
            Dltl::Prop(p) => Fo2::Letter(p.clone(), v),
            Dltl::S => Fo2::Exists(
                u,
                Box::new(fand(Fo2::Succ(v, u), Fo2::CSucc(v, u))),
            ),
            Dltl::P => Fo2::Exists(
                u,
                Box::new(fand(Fo2::Succ(u, v), Fo2::CSucc(u, v))),
            ),
            Dltl::Not(a) => fnot(go(a, v)?),
            Dltl::And(a, b) => fand(go(a, v)?, go(b, v)?),
            Dltl::Or(a, b) => for_(go(a, v)?, go(b, v)?),
            Dltl::M1(m, a) => {
                let rel = match (m.dir, m.mode) {
                    (Dir::X, Mode::Global) => Fo2::Succ(v, u),
                    (Dir::Y, Mode::Global) => Fo2::Succ(u, v),
                    (Dir::X, Mode::Class) => Fo2::CSucc(v, u),
                    (Dir::Y, Mode::Class) => Fo2::CSucc(u, v),
                };
                modal(rel, a)?
            }
            Dltl::F(m, a) => {
                let rel = match m {
                    Mode::Global => for_(Fo2::Eq(v, u), Fo2::Lt(v, u)),
                    Mode::Class => for_(Fo2::Eq(v, u), Fo2::CLt(v, u)),
                };
                modal(rel, a)?
            }
            Dltl::Pst(m, a) => {
                let rel = match m {
                    Mode::Global => for_(Fo2::Eq(v, u), Fo2::Lt(u, v)),
                    Mode::Class => for_(Fo2::Eq(v, u), Fo2::CLt(u, v)),
                };
                modal(rel, a)?
            }
            Dltl::Far(k, a) => {
                // u outside v's class: neither u = v nor u, v class-ordered
                let not_sim = fand(fnot(Fo2::CLt(v, u)), fnot(Fo2::CLt(u, v)));
                let range = match k {
                    FarKind::FarFuture => fand(Fo2::Lt(v, u), fnot(Fo2::Succ(v, u))),
                    FarKind::Future => Fo2::Lt(v, u),
                    FarKind::DeepPast => fand(Fo2::Lt(u, v), fnot(Fo2::Succ(u, v))),
                    FarKind::Past => Fo2::Lt(u, v),
                };
                modal(fand(range, not_sim), a)?
            }
            Dltl::Until(..) => return Err(DltlError::NotUnary("U")),
            Dltl::Since(..) => return Err(DltlError::NotUnary("S")),
        })
    }
    go(phi, V::X)
}

// ---------------------------------------------------------------------------
// FO² → unary-DLTL
// ---------------------------------------------------------------------------

/// Order type of two distinct positions: the linear-order part.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum DeltaT {
    YFar,  // y ≪ x
    YSucc, // y + 1 = x
    XSucc, // x + 1 = y
    XFar,  // x ≪ y
}

/// Order type of two distinct positions: the class part.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum GammaT {
    YCFar,  // y ≪^c x
    YCSucc, // y +^c 1 = x
    NotSim, // x ≁ y
    XCSucc, // x +^c 1 = y
    XCFar,  // x ≪^c y
}

/// The eleven satisfiable complete order types of a pair (x, y): either the
/// positions coincide or a consistent (Δ, Γ) combination.
const TYPES: [Option<(DeltaT, GammaT)>; 11] = [
    None,
    Some((DeltaT::YFar, GammaT::NotSim)),
    Some((DeltaT::YSucc, GammaT::NotSim)),
    Some((DeltaT::XSucc, GammaT::NotSim)),
    Some((DeltaT::XFar, GammaT::NotSim)),
    Some((DeltaT::XSucc, GammaT::XCSucc)),
    Some((DeltaT::XFar, GammaT::XCSucc)),
    Some((DeltaT::XFar, GammaT::XCFar)),
    Some((DeltaT::YSucc, GammaT::YCSucc)),
    Some((DeltaT::YFar, GammaT::YCSucc)),
    Some((DeltaT::YFar, GammaT::YCFar)),
];

/// Truth of an atomic two-variable formula under an order type.
fn atom_under(atom: &Fo2, t: Option<(DeltaT, GammaT)>) -> bool {
    use {DeltaT::*, GammaT::*};
    let eq = t.is_none();
    match atom {
        Fo2::Eq(u, v) => u == v || eq,
        Fo2::Lt(u, v) if u == v => false,
        Fo2::Lt(V::X, _) => matches!(t, Some((XSucc | XFar, _))),
        Fo2::Lt(_, _) => matches!(t, Some((YSucc | YFar, _))),
        Fo2::Succ(u, v) if u == v => false,
        Fo2::Succ(V::X, _) => matches!(t, Some((XSucc, _))),
        Fo2::Succ(_, _) => matches!(t, Some((YSucc, _))),
        Fo2::CSucc(u, v) if u == v => false,
        Fo2::CSucc(V::X, _) => matches!(t, Some((_, XCSucc))),
        Fo2::CSucc(_, _) => matches!(t, Some((_, YCSucc))),
        Fo2::CLt(u, v) if u == v => false,
        Fo2::CLt(V::X, _) => matches!(t, Some((_, XCSucc | XCFar))),
        Fo2::CLt(_, _) => matches!(t, Some((_, YCSucc | YCFar))),
        _ => unreachable!("not a two-variable atom"),
    }
}

/// Per-type translation: α′ speaks about x (the current position), β′ about
/// the quantified y.
fn type_formula(t: Option<(DeltaT, GammaT)>, alpha: Dltl, beta: Dltl) -> Dltl {
    use crate::formula::{XC, XG, YC, YG};
    use {DeltaT::*, GammaT::*};
    let f = |m, a: Dltl| Dltl::F(m, Box::new(a));
    let p = |m, a: Dltl| Dltl::Pst(m, Box::new(a));
    match t {
        None => dand(alpha, beta),
        Some((d, NotSim)) => {
            let right = match d {
                XFar => Dltl::Far(FarKind::FarFuture, Box::new(beta)),
                XSucc => dand(dnot(Dltl::S), dm(XG, beta)),
                YSucc => dand(dnot(Dltl::P), dm(YG, beta)),
                YFar => Dltl::Far(FarKind::DeepPast, Box::new(beta)),
            };
            dand(alpha, right)
        }
        Some((XSucc, XCSucc)) => dand(alpha, dand(dm(XC, beta), Dltl::S)),
        Some((XFar, XCSucc)) => dand(alpha, dand(dm(XC, beta), dnot(Dltl::S))),
        Some((XFar, XCFar)) => dand(alpha, dm(XC, dm(XC, f(Mode::Class, beta)))),
        Some((YSucc, YCSucc)) => dand(alpha, dand(dm(YC, beta), Dltl::P)),
        Some((YFar, YCSucc)) => dand(alpha, dand(dm(YC, beta), dnot(Dltl::P))),
        Some((YFar, YCFar)) => dand(alpha, dm(YC, dm(YC, p(Mode::Class, beta)))),
        _ => unreachable!("inconsistent order type"),
    }
}

/// Negation normal form; quantified subformulas stay opaque (a negation in
/// front of them is kept).
fn nnf(phi: &Fo2, neg: bool) -> Fo2 {
    match phi {
        Fo2::Not(a) => nnf(a, !neg),
        Fo2::And(a, b) => {
            if neg {
                for_(nnf(a, true), nnf(b, true))
            } else {
                fand(nnf(a, false), nnf(b, false))
            }
        }
        Fo2::Or(a, b) => {
            if neg {
                fand(nnf(a, true), nnf(b, true))
            } else {
                for_(nnf(a, false), nnf(b, false))
            }
        }
        other => {
            if neg {
                fnot(other.clone())
            } else {
                other.clone()
            }
        }
    }
}

/// Disjunctive normal form over literals (atoms, negated atoms, and opaque
/// quantified subformulas).
fn dnf(phi: &Fo2) -> Vec<Vec<Fo2>> {
    match phi {
        Fo2::And(a, b) => {
            let (da, db) = (dnf(a), dnf(b));
            let mut out = Vec::new();
            for ca in &da {
                for cb in &db {
                    let mut c = ca.clone();
                    c.extend(cb.iter().cloned());
                    out.push(c);
                }
            }
            out
        }
        Fo2::Or(a, b) => {
            let mut out = dnf(a);
            out.extend(dnf(b));
            out
        }
        other => vec![vec![other.clone()]],
    }
}

fn is_two_var_atom(l: &Fo2) -> bool {
    matches!(
        l,
        Fo2::Eq(u, v) | Fo2::Lt(u, v) | Fo2::Succ(u, v) | Fo2::CSucc(u, v) | Fo2::CLt(u, v)
        if u != v
    )
}

/// Translate an FO² formula with free variables ⊆ {x} into an equivalent
/// unary-DLTL formula, by the DNF-over-order-types procedure.
pub fn fo2_to_udltl(phi: &Fo2) -> Result<Dltl, DltlError> {
    if !phi.free_vars().is_subset(&[V::X].into()) {
        return Err(DltlError::FreeVariables);
    }
    translate(phi)
}

fn translate(phi: &Fo2) -> Result<Dltl, DltlError> {
    Ok(match phi {
        Fo2::Letter(a, _) => Dltl::Prop(a.clone()),
        // degenerate same-variable atoms
        Fo2::Eq(..) => Dltl::True,
        Fo2::Lt(..) | Fo2::Succ(..) | Fo2::CSucc(..) | Fo2::CLt(..) => Dltl::False,
        Fo2::Not(a) => dnot(translate(a)?),
        Fo2::And(a, b) => dand(translate(a)?, translate(b)?),
        Fo2::Or(a, b) => for2_or(translate(a)?, translate(b)?),
        Fo2::Forall(v, a) => dnot(translate(&Fo2::Exists(*v, Box::new(fnot((**a).clone()))))?),
        Fo2::Exists(v, a) => {
            // rebinding x is the same problem with the variables swapped
            let body = if *v == V::X { a.swap() } else { (**a).clone() };
            translate_exists_y(&body)?
        }
    })
}

fn for2_or(a: Dltl, b: Dltl) -> Dltl {
    dor(a, b)
}

/// ∃y. body with free(body) ⊆ {x, y}: DNF, split each conjunct into α(x),
/// β(y) and two-variable literals, and sum the consistent order types.
fn translate_exists_y(body: &Fo2) -> Result<Dltl, DltlError> {
    let mut out = Vec::new();
    for conjunct in dnf(&nnf(body, false)) {
        let mut alpha = Vec::new();
        let mut beta = Vec::new();
        let mut literals: Vec<(Fo2, bool)> = Vec::new();
        for l in conjunct {
            let (atom, negd) = match l {
                Fo2::Not(inner) if is_two_var_atom(&inner) => (*inner, true),
                other => {
                    if is_two_var_atom(&other) {
                        (other, false)
                    } else {
                        // one-variable part (atoms and opaque quantified
                        // subformulas, possibly negated)
                        let vs = other.free_vars();
                        if vs.contains(&V::Y) {
                            beta.push(other);
                        } else {
                            alpha.push(other);
                        }
                        continue;
                    }
                }
            };
            literals.push((atom, negd));
        }
        let alpha_t = alpha
            .into_iter()
            .map(|f| translate(&f))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .reduce(dand)
            .unwrap_or(Dltl::True);
        let beta_t = beta
            .into_iter()
            .map(|f| translate(&f.swap()))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .reduce(dand)
            .unwrap_or(Dltl::True);
        for t in TYPES {
            if literals.iter().all(|(a, n)| atom_under(a, t) != *n) {
                out.push(type_formula(t, alpha_t.clone(), beta_t.clone()));
            }
        }
    }
    Ok(dbig_or(out))
}

// ---------------------------------------------------------------------------
// Concrete syntax
// ---------------------------------------------------------------------------

impl fmt::Display for Dltl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // prec: 0 until/since, 1 or, 2 and, 3 unary
        fn go(phi: &Dltl, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
            let paren = |f: &mut fmt::Formatter<'_>, need: bool, inner: &dyn Fn(&mut fmt::Formatter<'_>) -> fmt::Result| {
                if need {
                    write!(f, "(")?;
                    inner(f)?;
                    write!(f, ")")
                } else {
                    inner(f)
                }
            };
            match phi {
                Dltl::True => write!(f, "true"),
                Dltl::False => write!(f, "false"),
                Dltl::Prop(p) => write!(f, "{p}"),
                Dltl::S => write!(f, "S"),
                Dltl::P => write!(f, "P"),
                Dltl::Not(a) => {
                    write!(f, "!")?;
                    go(a, f, 3)
                }
                Dltl::And(a, b) => paren(f, prec > 2, &|f| {
                    go(a, f, 2)?;
                    write!(f, " & ")?;
                    go(b, f, 2)
                }),
                Dltl::Or(a, b) => paren(f, prec > 1, &|f| {
                    go(a, f, 1)?;
                    write!(f, " | ")?;
                    go(b, f, 1)
                }),
                Dltl::M1(m, a) => {
                    write!(f, "{} ", m.name())?;
                    go(a, f, 3)
                }
                Dltl::F(m, a) => {
                    write!(f, "F{} ", if *m == Mode::Global { "g" } else { "c" })?;
                    go(a, f, 3)
                }
                Dltl::Pst(m, a) => {
                    write!(f, "P{} ", if *m == Mode::Global { "g" } else { "c" })?;
                    go(a, f, 3)
                }
                Dltl::Far(k, a) => {
                    let tok = match k {
                        FarKind::FarFuture => "fF",
                        FarKind::DeepPast => "dP",
                        FarKind::Future => "Fn",
                        FarKind::Past => "Pn",
                    };
                    write!(f, "{tok} ")?;
                    go(a, f, 3)
                }
                Dltl::Until(m, a, b) => paren(f, prec > 0, &|f| {
                    go(a, f, 1)?;
                    write!(f, " U{} ", if *m == Mode::Global { "g" } else { "c" })?;
                    go(b, f, 1)
                }),
                Dltl::Since(m, a, b) => paren(f, prec > 0, &|f| {
                    go(a, f, 1)?;
                    write!(f, " S{} ", if *m == Mode::Global { "g" } else { "c" })?;
                    go(b, f, 1)
                }),
            }
        }
        go(self, f, 0)
    }
}

impl fmt::Display for Fo2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // prec: 0 quantifier, 1 or, 2 and, 3 not
        fn go(phi: &Fo2, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
            match phi {
                Fo2::Letter(a, v) => write!(f, "{a}({})", v.name()),
                Fo2::Eq(u, v) => write!(f, "{}={}", u.name(), v.name()),
                Fo2::Lt(u, v) => write!(f, "{}<{}", u.name(), v.name()),
                Fo2::Succ(u, v) => write!(f, "{}+1={}", u.name(), v.name()),
                Fo2::CSucc(u, v) => write!(f, "{}~+1={}", u.name(), v.name()),
                Fo2::CLt(u, v) => write!(f, "{}<~{}", u.name(), v.name()),
                Fo2::Not(a) => {
                    write!(f, "!")?;
                    go(a, f, 3)
                }
                Fo2::And(a, b) | Fo2::Or(a, b) => {
                    let (op, p) = if matches!(phi, Fo2::And(..)) { ("&", 2) } else { ("|", 1) };
                    if prec > p {
                        write!(f, "(")?;
                    }
                    go(a, f, p)?;
                    write!(f, " {op} ")?;
                    go(b, f, p)?;
                    if prec > p {
                        write!(f, ")")?;
                    }
                    Ok(())
                }
                Fo2::Exists(v, a) | Fo2::Forall(v, a) => {
                    let q = if matches!(phi, Fo2::Exists(..)) { "E" } else { "A" };
                    if prec > 0 {
                        write!(f, "(")?;
                    }
                    write!(f, "{q} {}. ", v.name())?;
                    go(a, f, 0)?;
                    if prec > 0 {
                        write!(f, ")")?;
                    }
                    Ok(())
                }
            }
        }
        go(self, f, 0)
    }
}

struct Lexer<'a> {
    text: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer { text: text.as_bytes(), pos: 0 }
    }
    fn skip_ws(&mut self) {
        while self.pos < self.text.len() && self.text[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }
    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.text.get(self.pos).copied()
    }
    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        if self.text[self.pos..].starts_with(s.as_bytes()) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }
    fn ident(&mut self) -> Option<String> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.text.len()
            && (self.text[self.pos].is_ascii_alphanumeric() || self.text[self.pos] == b'_')
        {
            self.pos += 1;
        }
        (self.pos > start)
            .then(|| String::from_utf8_lossy(&self.text[start..self.pos]).into_owned())
    }
    fn err(&self, msg: &str) -> DltlError {
        DltlError::Parse(self.pos, msg.to_string())
    }
}

impl Dltl {
    /// Parse the concrete DLTL syntax: `!`, `&`, `|`, the unary modalities
    /// `Xg Xc Yg Yc Fg Fc Pg Pc`, the not-in-class modalities `fF dP Fn Pn`,
    /// infix `Ug Uc Sg Sc`, `S`, `P`, `true`, `false` and letter
    /// propositions.
    pub fn parse(text: &str) -> Result<Dltl, DltlError> {
        let mut lx = Lexer::new(text);
        let f = parse_until(&mut lx)?;
        if lx.peek().is_some() {
            return Err(lx.err("trailing input"));
        }
        Ok(f)
    }
}

fn parse_until(lx: &mut Lexer) -> Result<Dltl, DltlError> {
    let a = parse_or(lx)?;
    for (tok, mode, until) in [
        ("Ug", Mode::Global, true),
        ("Uc", Mode::Class, true),
        ("Sg", Mode::Global, false),
        ("Sc", Mode::Class, false),
    ] {
        let save = lx.pos;
        lx.skip_ws();
        if lx.eat(tok) && !matches!(lx.text.get(lx.pos), Some(c) if c.is_ascii_alphanumeric()) {
            let b = parse_until(lx)?;
            return Ok(if until {
                Dltl::Until(mode, Box::new(a), Box::new(b))
            } else {
                Dltl::Since(mode, Box::new(a), Box::new(b))
            });
        }
        lx.pos = save;
    }
    Ok(a)
}

fn parse_or(lx: &mut Lexer) -> Result<Dltl, DltlError> {
    let mut a = parse_and(lx)?;
    while lx.peek() == Some(b'|') {
        lx.eat("|");
        a = dor(a, parse_and(lx)?);
    }
    Ok(a)
}

fn parse_and(lx: &mut Lexer) -> Result<Dltl, DltlError> {
    let mut a = parse_unary(lx)?;
    while lx.peek() == Some(b'&') {
        lx.eat("&");
        a = dand(a, parse_unary(lx)?);
    }
    Ok(a)
}

fn parse_unary(lx: &mut Lexer) -> Result<Dltl, DltlError> {
    use crate::formula::{XC, XG, YC, YG};
    if lx.peek() == Some(b'!') {
        lx.eat("!");
        return Ok(dnot(parse_unary(lx)?));
    }
    if lx.peek() == Some(b'(') {
        lx.eat("(");
        let a = parse_until(lx)?;
        if !lx.eat(")") {
            return Err(lx.err("expected )"));
        }
        return Ok(a);
    }
    let id = lx.ident().ok_or_else(|| lx.err("expected a formula"))?;
    Ok(match id.as_str() {
        "true" => Dltl::True,
        "false" => Dltl::False,
        "S" => Dltl::S,
        "P" => Dltl::P,
        "Xg" => dm(XG, parse_unary(lx)?),
        "Xc" => dm(XC, parse_unary(lx)?),
        "Yg" => dm(YG, parse_unary(lx)?),
        "Yc" => dm(YC, parse_unary(lx)?),
        "Fg" => Dltl::F(Mode::Global, Box::new(parse_unary(lx)?)),
        "Fc" => Dltl::F(Mode::Class, Box::new(parse_unary(lx)?)),
        "Pg" => Dltl::Pst(Mode::Global, Box::new(parse_unary(lx)?)),
        "Pc" => Dltl::Pst(Mode::Class, Box::new(parse_unary(lx)?)),
        "fF" => Dltl::Far(FarKind::FarFuture, Box::new(parse_unary(lx)?)),
        "dP" => Dltl::Far(FarKind::DeepPast, Box::new(parse_unary(lx)?)),
        "Fn" => Dltl::Far(FarKind::Future, Box::new(parse_unary(lx)?)),
        "Pn" => Dltl::Far(FarKind::Past, Box::new(parse_unary(lx)?)),
        _ => Dltl::Prop(id),
    })
}

impl Fo2 {
    /// Parse the concrete FO² syntax: `E y. phi`, `A y. phi`, `a(y)`,
    /// `x=y`, `x<y`, `x+1=y`, `x~+1=y`, `x<~y`, connectives `& | ! ->`.
    pub fn parse(text: &str) -> Result<Fo2, DltlError> {
        let mut lx = Lexer::new(text);
        let f = parse_fo2_implies(&mut lx)?;
        if lx.peek().is_some() {
            return Err(lx.err("trailing input"));
        }
        Ok(f)
    }
}

fn parse_fo2_implies(lx: &mut Lexer) -> Result<Fo2, DltlError> {
    let a = parse_fo2_or(lx)?;
    if lx.eat("->") {
        let b = parse_fo2_implies(lx)?;
        return Ok(for_(fnot(a), b));
    }
    Ok(a)
}

fn parse_fo2_or(lx: &mut Lexer) -> Result<Fo2, DltlError> {
    let mut a = parse_fo2_and(lx)?;
    while lx.peek() == Some(b'|') {
        lx.eat("|");
        a = for_(a, parse_fo2_and(lx)?);
    }
    Ok(a)
}

fn parse_fo2_and(lx: &mut Lexer) -> Result<Fo2, DltlError> {
    let mut a = parse_fo2_unary(lx)?;
    while lx.peek() == Some(b'&') {
        lx.eat("&");
        a = fand(a, parse_fo2_unary(lx)?);
    }
    Ok(a)
}

fn parse_var(lx: &mut Lexer) -> Result<V, DltlError> {
    if lx.eat("x") {
        Ok(V::X)
    } else if lx.eat("y") {
        Ok(V::Y)
    } else {
        Err(lx.err("expected a variable"))
    }
}

fn parse_fo2_unary(lx: &mut Lexer) -> Result<Fo2, DltlError> {
    if lx.peek() == Some(b'!') {
        lx.eat("!");
        return Ok(fnot(parse_fo2_unary(lx)?));
    }
    if lx.peek() == Some(b'(') {
        lx.eat("(");
        let a = parse_fo2_implies(lx)?;
        if !lx.eat(")") {
            return Err(lx.err("expected )"));
        }
        return Ok(a);
    }
    if lx.eat("E ") || lx.eat("E\t") {
        let v = parse_var(lx)?;
        if !lx.eat(".") {
            return Err(lx.err("expected . after quantifier"));
        }
        return Ok(Fo2::Exists(v, Box::new(parse_fo2_implies(lx)?)));
    }
    if lx.eat("A ") || lx.eat("A\t") {
        let v = parse_var(lx)?;
        if !lx.eat(".") {
            return Err(lx.err("expected . after quantifier"));
        }
        return Ok(Fo2::Forall(v, Box::new(parse_fo2_implies(lx)?)));
    }
    // either a relation starting with a variable, or a letter predicate
    lx.skip_ws();
    let save = lx.pos;
    if let Ok(u) = parse_var(lx) {
        if lx.eat("~+1=") {
            return Ok(Fo2::CSucc(u, parse_var(lx)?));
        }
        if lx.eat("+1=") {
            return Ok(Fo2::Succ(u, parse_var(lx)?));
        }
        if lx.eat("<~") {
            return Ok(Fo2::CLt(u, parse_var(lx)?));
        }
        if lx.eat("<") {
            return Ok(Fo2::Lt(u, parse_var(lx)?));
        }
        if lx.eat("=") {
            return Ok(Fo2::Eq(u, parse_var(lx)?));
        }
        lx.pos = save;
    }
    let id = lx.ident().ok_or_else(|| lx.err("expected a predicate"))?;
    if !lx.eat("(") {
        return Err(lx.err("expected ( after letter"));
    }
    let v = parse_var(lx)?;
    if !lx.eat(")") {
        return Err(lx.err("expected )"));
    }
    Ok(Fo2::Letter(id, v))
}
