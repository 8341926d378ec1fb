//! Denotational semantics of the μ-calculus on finite data words, by plain
//! fixpoint iteration.

use crate::dataword::{DataWord, Pos};
use crate::formula::{Atom0, Dir, Formula, Mod1, Mode};
use std::collections::BTreeMap;
use thiserror::Error;

/// A subset of the positions 1..=n of some word.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PosSet {
    n: usize,
    bits: Vec<bool>,
}

impl PosSet {
    pub fn empty(n: usize) -> Self {
        PosSet { n, bits: vec![false; n] }
    }
    pub fn full(n: usize) -> Self {
        PosSet { n, bits: vec![true; n] }
    }
    pub fn from_positions(n: usize, ps: &[Pos]) -> Self {
        let mut s = PosSet::empty(n);
        for &p in ps {
            s.insert(p);
        }
        s
    }
    pub fn len_bound(&self) -> usize {
        self.n
    }
    pub fn contains(&self, i: Pos) -> bool {
        i >= 1 && i <= self.n && self.bits[i - 1]
    }
    pub fn insert(&mut self, i: Pos) {
        self.bits[i - 1] = true;
    }
    pub fn positions(&self) -> Vec<Pos> {
        (1..=self.n).filter(|&i| self.bits[i - 1]).collect()
    }
    pub fn union(&self, other: &PosSet) -> PosSet {
        debug_assert_eq!(self.n, other.n);
        PosSet {
            n: self.n,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect(),
        }
    }
    pub fn intersect(&self, other: &PosSet) -> PosSet {
        debug_assert_eq!(self.n, other.n);
        PosSet {
            n: self.n,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect(),
        }
    }
    pub fn complement(&self) -> PosSet {
        PosSet { n: self.n, bits: self.bits.iter().map(|b| !b).collect() }
    }
    pub fn is_subset(&self, other: &PosSet) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }
}

/// Valuation of the free fixpoint variables.
pub type Environment = BTreeMap<String, PosSet>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("unbound fixpoint variable {0:?}")]
    Unbound(String),
}

/// The set of positions of `w` satisfying `φ` under `env`. Temporal sugar is
/// expanded first; the core clauses follow the semantics figure literally.
pub fn eval(w: &DataWord, phi: &Formula, env: &Environment) -> Result<PosSet, EvalError> {
    let phi = if has_sugar(phi) { phi.desugar() } else { phi.clone() };
    let mut env = env.clone();
    if let Some(nu) = uniform_sign(&phi, &env) {
        return eval_flat(w, &phi, &mut env, nu);
    }
    let mut memo = Memo::default();
    mark_closed(&phi, &mut memo);
    eval_core(w, &phi, &mut env, &mut memo)
}

/// If every binder in φ has the same sign, the nested fixpoints equal the
/// simultaneous one (Bekić), which chaotic iteration solves much faster
/// than recomputing inner fixpoints from scratch. Requires distinct binder
/// names, disjoint from the ambient environment.
fn uniform_sign(phi: &Formula, env: &Environment) -> Option<bool> {
    use Formula::*;
    fn scan(f: &Formula, names: &mut Vec<String>, sign: &mut Option<bool>) -> bool {
        match f {
            Mu(x, a) | Nu(x, a) => {
                let nu = matches!(f, Nu(..));
                if sign.is_some_and(|s| s != nu) || names.contains(x) {
                    return false;
                }
                *sign = Some(nu);
                names.push(x.clone());
                scan(a, names, sign)
            }
            _ => f.children().iter().all(|c| scan(c, names, sign)),
        }
    }
    let mut names = Vec::new();
    let mut sign = None;
    if !scan(phi, &mut names, &mut sign) {
        return None;
    }
    let nu = sign?; // no binders at all: nested path is already cheap
    if names.iter().any(|x| env.contains_key(x)) {
        return None;
    }
    Some(nu)
}

fn eval_flat(
    w: &DataWord,
    phi: &Formula,
    env: &mut Environment,
    nu: bool,
) -> Result<PosSet, EvalError> {
    use Formula::*;
    fn binders<'a>(f: &'a Formula, out: &mut Vec<(&'a str, &'a Formula)>) {
        if let Mu(x, a) | Nu(x, a) = f {
            out.push((x, a));
        }
        for c in f.children() {
            binders(c, out);
        }
    }
    // a binder node reads the current approximation of its variable
    fn ev(
        w: &DataWord,
        f: &Formula,
        env: &mut Environment,
        memo: &mut Memo,
    ) -> Result<PosSet, EvalError> {
        match f {
            Mu(x, _) | Nu(x, _) => Ok(env.get(x).expect("binder seeded").clone()),
            And(a, b) => Ok(ev(w, a, env, memo)?.intersect(&ev(w, b, env, memo)?)),
            Or(a, b) => Ok(ev(w, a, env, memo)?.union(&ev(w, b, env, memo)?)),
            Mod(..) | DualMod(..) => {
                // delegate the one-step clauses; their subterm is re-entered here
                let inner = match f {
                    Mod(_, a) | DualMod(_, a) => ev(w, a, env, memo)?,
                    _ => unreachable!(),
                };
                let n = w.len();
                let m = match f {
                    Mod(m, _) | DualMod(m, _) => *m,
                    _ => unreachable!(),
                };
                let weak = matches!(f, DualMod(..));
                let mut s = PosSet::empty(n);
                for i in 1..=n {
                    match step(w, m, i) {
                        Some(j) => {
                            if inner.contains(j) {
                                s.insert(i);
                            }
                        }
                        None => {
                            if weak {
                                s.insert(i);
                            }
                        }
                    }
                }
                Ok(s)
            }
            leaf => eval_core(w, leaf, env, memo),
        }
    }
    let mut bs = Vec::new();
    binders(phi, &mut bs);
    let n = w.len();
    let start = if nu { PosSet::full(n) } else { PosSet::empty(n) };
    for (x, _) in &bs {
        env.insert(x.to_string(), start.clone());
    }
    bs.reverse(); // innermost first converges quicker
    let mut memo = Memo::default();
    loop {
        let mut changed = false;
        for (x, body) in &bs {
            let v = ev(w, body, env, &mut memo)?;
            if env.get(*x) != Some(&v) {
                env.insert(x.to_string(), v);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    ev(w, phi, env, &mut memo)
}

/// Per-call cache: subformulas without free fixpoint variables have an
/// env-independent value, so fixpoint iteration need not recompute them.
#[derive(Default)]
struct Memo {
    closed: std::collections::HashSet<*const Formula>,
    cache: std::collections::HashMap<*const Formula, PosSet>,
}

fn mark_closed(f: &Formula, memo: &mut Memo) -> std::collections::BTreeSet<String> {
    use Formula::*;
    let fv = match f {
        Var(x) => [x.clone()].into(),
        Mu(x, a) | Nu(x, a) => {
            let mut s = mark_closed(a, memo);
            s.remove(x);
            s
        }
        _ => {
            let mut s = std::collections::BTreeSet::new();
            for c in f.children() {
                s.extend(mark_closed(c, memo));
            }
            s
        }
    };
    if fv.is_empty() {
        memo.closed.insert(f as *const Formula);
    }
    fv
}

fn has_sugar(f: &Formula) -> bool {
    use Formula::*;
    match f {
        Until(..) | Since(..) | Fut(..) | Glob(..) | Past(..) | Hist(..) => true,
        _ => f.children().iter().any(|c| has_sugar(c)),
    }
}

// Positions reachable by the modality m from i, i.e. the target of one step.
fn step(w: &DataWord, m: Mod1, i: Pos) -> Option<Pos> {
    match (m.dir, m.mode) {
        (Dir::X, Mode::Global) => {
            if i < w.len() {
                Some(i + 1)
            } else {
                None
            }
        }
        (Dir::Y, Mode::Global) => {
            if i > 1 {
                Some(i - 1)
            } else {
                None
            }
        }
        (Dir::X, Mode::Class) => w.class_successor(i).unwrap(),
        (Dir::Y, Mode::Class) => w.class_predecessor(i).unwrap(),
    }
}

fn atom_set(w: &DataWord, a: Atom0) -> PosSet {
    let n = w.len();
    let mut s = PosSet::empty(n);
    for i in 1..=n {
        let t = w.one_type(i).unwrap();
        let holds = match a {
            Atom0::S => t.succ,
            Atom0::P => t.pred,
            Atom0::FirstG => i == 1,
            Atom0::LastG => i == n,
            Atom0::FirstC => w.class_predecessor(i).unwrap().is_none(),
            Atom0::LastC => w.class_successor(i).unwrap().is_none(),
        };
        if holds {
            s.insert(i);
        }
    }
    s
}

fn eval_core(
    w: &DataWord,
    phi: &Formula,
    env: &mut Environment,
    memo: &mut Memo,
) -> Result<PosSet, EvalError> {
    use Formula::*;
    let n = w.len();
    let key = phi as *const Formula;
    if memo.closed.contains(&key) {
        if let Some(v) = memo.cache.get(&key) {
            return Ok(v.clone());
        }
    }
    let result = match phi {
        True => PosSet::full(n),
        False => PosSet::empty(n),
        Prop(p) => {
            let mut s = PosSet::empty(n);
            for i in 1..=n {
                if w.letter(i) == p {
                    s.insert(i);
                }
            }
            s
        }
        NegProp(p) => {
            let mut s = PosSet::full(n);
            for i in 1..=n {
                if w.letter(i) == p {
                    s.bits[i - 1] = false;
                }
            }
            s
        }
        Atom(a) => atom_set(w, *a),
        NegAtom(a) => atom_set(w, *a).complement(),
        Var(x) => env.get(x).cloned().ok_or_else(|| EvalError::Unbound(x.clone()))?,
        And(a, b) => eval_core(w, a, env, memo)?.intersect(&eval_core(w, b, env, memo)?),
        Or(a, b) => eval_core(w, a, env, memo)?.union(&eval_core(w, b, env, memo)?),
        Mod(m, a) => {
            let inner = eval_core(w, a, env, memo)?;
            let mut s = PosSet::empty(n);
            for i in 1..=n {
                if let Some(j) = step(w, *m, i) {
                    if inner.contains(j) {
                        s.insert(i);
                    }
                }
            }
            s
        }
        DualMod(m, a) => {
            // ~m φ holds where the m-step is missing or lands in φ
            let inner = eval_core(w, a, env, memo)?;
            let mut s = PosSet::empty(n);
            for i in 1..=n {
                match step(w, *m, i) {
                    None => s.insert(i),
                    Some(j) => {
                        if inner.contains(j) {
                            s.insert(i);
                        }
                    }
                }
            }
            s
        }
        Mu(x, a) => iterate(w, x, a, env, memo, PosSet::empty(n))?,
        Nu(x, a) => iterate(w, x, a, env, memo, PosSet::full(n))?,
        _ => unreachable!("sugar was expanded by eval()"),
    };
    if memo.closed.contains(&key) {
        memo.cache.insert(key, result.clone());
    }
    Ok(result)
}

fn iterate(
    w: &DataWord,
    x: &str,
    body: &Formula,
    env: &mut Environment,
    memo: &mut Memo,
    start: PosSet,
) -> Result<PosSet, EvalError> {
    let shadowed = env.insert(x.to_string(), start);
    let result = loop {
        let cur = env.get(x).unwrap().clone();
        let next = eval_core(w, body, env, memo)?;
        if next == cur {
            break cur;
        }
        env.insert(x.to_string(), next);
    };
    match shadowed {
        Some(s) => {
            env.insert(x.to_string(), s);
        }
        None => {
            env.remove(x);
        }
    }
    Ok(result)
}

/// w ⊨ φ: truth at position 1; the empty word satisfies nothing.
pub fn models(w: &DataWord, phi: &Formula) -> Result<bool, EvalError> {
    Ok(w.len() >= 1 && eval(w, phi, &Environment::new())?.contains(1))
}

/// eval with the empty environment (φ must be a sentence).
pub fn eval_sentence(w: &DataWord, phi: &Formula) -> Result<PosSet, EvalError> {
    eval(w, phi, &Environment::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataword::{alphabet, enumerate_up_to};
    use crate::formula::Formula;

    fn w0() -> DataWord {
        DataWord::parse("a:1 b:2 a:2 a:1 b:3 a:1 b:2").unwrap()
    }

    fn f(s: &str) -> Formula {
        Formula::parse(s).unwrap()
    }

    fn positions(w: &DataWord, s: &str) -> Vec<Pos> {
        eval_sentence(w, &f(s)).unwrap().positions()
    }

    #[test]
    fn atoms_on_w0() {
        let w = w0();
        assert_eq!(positions(&w, "S"), vec![2]);
        assert_eq!(positions(&w, "firstc"), vec![1, 2, 5]);
        assert_eq!(positions(&w, "lastc"), vec![5, 6, 7]);
        assert_eq!(positions(&w, "firstg"), vec![1]);
        assert_eq!(positions(&w, "Fc a"), vec![1, 2, 3, 4, 6]);
    }

    #[test]
    fn models_cases() {
        let w = w0();
        assert!(models(&w, &f("Fg b")).unwrap());
        assert!(!models(&DataWord::empty(), &f("true")).unwrap());
        assert!(!models(&w, &f("nu x. Xg Yc x")).unwrap());
        assert_eq!(positions(&w, "nu x. Xg Yc x"), vec![2]);
    }

    #[test]
    fn s_and_p_definable_in_nu_fragment() {
        // S ≡ νx. Xg Yc x and P ≡ Yg S, on every small one-letter word
        let s_def = f("nu x. Xg Yc x");
        let p_def = f("Yg nu x. Xg Yc x");
        for w in enumerate_up_to(&alphabet("a"), 6) {
            assert_eq!(
                eval_sentence(&w, &s_def).unwrap(),
                eval_sentence(&w, &f("S")).unwrap(),
                "S mismatch on {w}"
            );
            assert_eq!(
                eval_sentence(&w, &p_def).unwrap(),
                eval_sentence(&w, &f("P")).unwrap(),
                "P mismatch on {w}"
            );
        }
    }

    #[test]
    fn unbound_variable_is_an_error() {
        let w = w0();
        let phi = Formula::Var("x".into());
        assert_eq!(
            eval(&w, &phi, &Environment::new()),
            Err(EvalError::Unbound("x".into()))
        );
    }

    #[test]
    fn monotonicity_in_environment() {
        // grow the valuation of x, the result never shrinks
        let body = crate::formula::or(
            crate::formula::prop("a"),
            crate::formula::md(crate::formula::XG, crate::formula::var("x")),
        );
        for w in enumerate_up_to(&alphabet("ab"), 4) {
            let n = w.len();
            for small in 0..(1u32 << n) {
                for big in 0..(1u32 << n) {
                    if small & big != small {
                        continue;
                    }
                    let mk = |mask: u32| {
                        PosSet::from_positions(
                            n,
                            &(1..=n).filter(|i| mask >> (i - 1) & 1 == 1).collect::<Vec<_>>(),
                        )
                    };
                    let mut env1 = Environment::new();
                    env1.insert("x".into(), mk(small));
                    let mut env2 = Environment::new();
                    env2.insert("x".into(), mk(big));
                    let r1 = eval(&w, &body, &env1).unwrap();
                    let r2 = eval(&w, &body, &env2).unwrap();
                    assert!(r1.is_subset(&r2));
                }
            }
        }
    }

    #[test]
    fn fixpoint_law() {
        let phi = f("mu x. b | (a & Xg x)");
        let (x, body) = match &phi {
            Formula::Mu(x, body) => (x.clone(), (**body).clone()),
            _ => unreachable!(),
        };
        for w in enumerate_up_to(&alphabet("ab"), 4) {
            let m = eval_sentence(&w, &phi).unwrap();
            let mut env = Environment::new();
            env.insert(x.clone(), m.clone());
            assert_eq!(eval(&w, &body, &env).unwrap(), m);
        }
    }

    #[test]
    fn mu_below_nu() {
        for body in ["a | Xg x", "Xc x | S", "Yg x & ~Xc x"] {
            let mu_f = f(&format!("mu x. {body}"));
            let nu_f = f(&format!("nu x. {body}"));
            for w in enumerate_up_to(&alphabet("ab"), 4) {
                let m = eval_sentence(&w, &mu_f).unwrap();
                let n = eval_sentence(&w, &nu_f).unwrap();
                assert!(m.is_subset(&n));
            }
        }
    }

    #[test]
    fn dualize_is_complement() {
        for phi in [
            "mu x. (Xg Xc x | a)",
            "nu x. Xg Yc x",
            "a Ug b",
            "Gg (a | S)",
            "~Xc P | firstc",
        ] {
            let phi = f(phi);
            let dual = phi.dualize().unwrap();
            for w in enumerate_up_to(&alphabet("ab"), 4) {
                let lhs = eval_sentence(&w, &dual).unwrap();
                let rhs = eval_sentence(&w, &phi).unwrap().complement();
                assert_eq!(lhs, rhs, "on {w}");
            }
            // dualize is an involution semantically
            let back = dual.dualize().unwrap();
            for w in enumerate_up_to(&alphabet("ab"), 3) {
                assert_eq!(
                    eval_sentence(&w, &back).unwrap(),
                    eval_sentence(&w, &phi).unwrap()
                );
            }
        }
    }

    #[test]
    fn permutation_invariance() {
        let phi = f("mu x. (Xg Xc x | a) & ~Yc b");
        for w in enumerate_up_to(&alphabet("ab"), 4) {
            // shift all values by 5: a value permutation
            let shifted = DataWord::new(
                w.letters.clone(),
                w.values.iter().map(|v| v + 5).collect(),
            )
            .unwrap();
            assert_eq!(
                eval_sentence(&w, &phi).unwrap(),
                eval_sentence(&shifted, &phi).unwrap()
            );
        }
    }

    #[test]
    fn until_sugar_matches_expansion() {
        let sugar = f("a Ug b");
        let core = f("mu x. b | (a & Xg x)");
        for w in enumerate_up_to(&alphabet("ab"), 4) {
            assert_eq!(
                eval_sentence(&w, &sugar).unwrap(),
                eval_sentence(&w, &core).unwrap()
            );
        }
    }

    #[test]
    fn s2_identity() {
        // "class successor is two steps ahead", built from an even/odd split
        let odd = "(mu e. firstg | Yg Yg e)";
        let even = "(mu e. Yg firstg | Yg Yg e)";
        let s2 = f(&format!(
            "(nu x. {odd} & Xg Xg Yc ({odd} & x)) | (nu x. {even} & Xg Xg Yc ({even} & x))"
        ));
        for w in enumerate_up_to(&alphabet("ab"), 6) {
            let got = eval_sentence(&w, &s2).unwrap();
            let mut want = PosSet::empty(w.len());
            for i in 1..=w.len() {
                if w.class_successor(i).unwrap() == Some(i + 2) {
                    want.insert(i);
                }
            }
            assert_eq!(got, want, "on {w}");
        }
    }
}
