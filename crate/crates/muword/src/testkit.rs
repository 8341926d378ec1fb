//! Exhaustive and randomized oracles: language equivalence between arbitrary
//! acceptors, fragment-aware random formula generation, counterexample
//! shrinking.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cascades::{cascade_accepts, cmt_cascade_accepts, Cascade, CascadeError, CmtCascade};
use crate::dataauto::{membership, DaError, DataAutomaton};
use crate::dataword::{enumerate_up_to, DataWord};
use crate::dltl::{eval_dltl, eval_fo2, Dltl, DltlError, Fo2, V};
use crate::evaluator::{models, EvalError};
use crate::formula::{and, md, or, prop, var, Atom0, Dir, Formula, Mod1, Mode};
use crate::fragments::{Basis, LayerKind};

#[derive(Debug, Error)]
pub enum TestkitError {
    #[error("evaluator: {0}")]
    Eval(#[from] EvalError),
    #[error("automaton: {0}")]
    Automaton(#[from] DaError),
    #[error("cascade: {0}")]
    Cascade(#[from] CascadeError),
    #[error("dltl: {0}")]
    Dltl(#[from] DltlError),
    #[error("FO² acceptor must have free variables ⊆ {{x}}")]
    FreeVariable,
}

/// A uniform membership interface over data words. FO² formulas may have x
/// free; x is then bound to position 1 (so the empty word is rejected).
#[derive(Debug, Clone)]
pub enum Acceptor {
    Formula(Formula),
    Automaton(DataAutomaton),
    Cascade(Cascade),
    CmtCascade(CmtCascade),
    Dltl(Dltl),
    Fo2(Fo2),
}

impl Acceptor {
    pub fn accepts(&self, w: &DataWord) -> Result<bool, TestkitError> {
        match self {
            Acceptor::Formula(f) => Ok(models(w, f)?),
            Acceptor::Automaton(a) => Ok(membership(a, w)?),
            Acceptor::Cascade(c) => Ok(cascade_accepts(c, w)?),
            Acceptor::CmtCascade(c) => Ok(cmt_cascade_accepts(c, w)?),
            Acceptor::Dltl(d) => Ok(!w.is_empty() && eval_dltl(w, d).contains(1)),
            Acceptor::Fo2(f) => {
                let fv = f.free_vars();
                if fv.contains(&V::Y) {
                    return Err(TestkitError::FreeVariable);
                }
                let mut asg = std::collections::BTreeMap::new();
                if fv.contains(&V::X) {
                    if w.is_empty() {
                        return Ok(false);
                    }
                    asg.insert(V::X, 1usize);
                }
                Ok(eval_fo2(w, f, &asg)?)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub word: DataWord,
    pub lhs: bool,
    pub rhs: bool,
}

/// Exhaustive equivalence check over all words of length ≤ `max_len` (one
/// representative per data permutation class), in canonical enumeration
/// order. Returns the first disagreement, plus the number of words visited.
pub fn equivalence_check(
    lhs: &Acceptor,
    rhs: &Acceptor,
    alphabet: &[String],
    max_len: usize,
) -> Result<(Option<Counterexample>, usize), TestkitError> {
    let mut visited = 0usize;
    for w in enumerate_up_to(alphabet, max_len) {
        visited += 1;
        let a = lhs.accepts(&w)?;
        let b = rhs.accepts(&w)?;
        if a != b {
            return Ok((Some(Counterexample { word: w, lhs: a, rhs: b }), visited));
        }
    }
    Ok((None, visited))
}

/// Re-enumerates below the counterexample's length and returns the first
/// shorter disagreement, or the input unchanged if none exists. Together with
/// `equivalence_check` returning the first disagreement in enumeration order,
/// the result is minimal under (length, enumeration order).
pub fn shrink(
    c: &Counterexample,
    lhs: &Acceptor,
    rhs: &Acceptor,
    alphabet: &[String],
) -> Result<Counterexample, TestkitError> {
    if c.word.len() > 0 {
        for w in enumerate_up_to(alphabet, c.word.len() - 1) {
            let a = lhs.accepts(&w)?;
            let b = rhs.accepts(&w)?;
            if a != b {
                return Ok(Counterexample { word: w, lhs: a, rhs: b });
            }
        }
    }
    Ok(c.clone())
}

/// Expected size of `enumerate_up_to(alphabet, max_len)`:
/// Σ_{m ≤ max_len} |Σ|^m · Bell(m).
pub fn expected_word_count(sigma: usize, max_len: usize) -> usize {
    // Bell numbers via the Bell triangle.
    let mut bell = vec![1u64];
    let mut row = vec![1u64];
    for _ in 0..max_len {
        let mut next = vec![*row.last().unwrap()];
        for x in &row {
            let last = *next.last().unwrap();
            next.push(last + x);
        }
        bell.push(next[0]);
        row = next;
    }
    let mut total = 0u64;
    let mut pw = 1u64;
    for b in bell.iter().take(max_len + 1) {
        total += pw * b;
        pw *= sigma as u64;
    }
    total as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FragmentSpec {
    Any,
    NuOnly,
    MuOnly,
    Br,
    Bma,
    PureKind(LayerKind),
}

#[derive(Clone, Copy, PartialEq)]
enum SignPolicy {
    Both,
    MuOnly,
    NuOnly,
}

struct Gen {
    rng: ChaCha8Rng,
    fresh: usize,
}

const LETTERS: [&str; 2] = ["a", "b"];
const ATOMS: [Atom0; 6] = [
    Atom0::S,
    Atom0::P,
    Atom0::FirstG,
    Atom0::FirstC,
    Atom0::LastG,
    Atom0::LastC,
];

fn kind_mods(kind: Option<LayerKind>) -> Vec<Mod1> {
    let all = [
        Mod1 { dir: Dir::X, mode: Mode::Global },
        Mod1 { dir: Dir::X, mode: Mode::Class },
        Mod1 { dir: Dir::Y, mode: Mode::Global },
        Mod1 { dir: Dir::Y, mode: Mode::Class },
    ];
    match kind {
        None => all.to_vec(),
        Some(LayerKind::DirK(d)) => all.iter().copied().filter(|m| m.dir == d).collect(),
        Some(LayerKind::ModeK(mo)) => all.iter().copied().filter(|m| m.mode == mo).collect(),
    }
}

impl Gen {
    fn leaf(&mut self, scope: &[String]) -> Formula {
        let n = if scope.is_empty() { 5 } else { 6 };
        match self.rng.gen_range(0..n) {
            0 => Formula::True,
            1 => Formula::False,
            2 => prop(LETTERS[self.rng.gen_range(0..LETTERS.len())]),
            3 => Formula::NegProp(LETTERS[self.rng.gen_range(0..LETTERS.len())].to_string()),
            4 => {
                let a = ATOMS[self.rng.gen_range(0..ATOMS.len())];
                if self.rng.gen_bool(0.5) {
                    Formula::Atom(a)
                } else {
                    Formula::NegAtom(a)
                }
            }
            _ => var(&scope[self.rng.gen_range(0..scope.len())].clone()),
        }
    }

    fn gen(
        &mut self,
        depth: usize,
        scope: &mut Vec<String>,
        sign: SignPolicy,
        kind: Option<LayerKind>,
    ) -> Formula {
        if depth == 0 {
            return self.leaf(scope);
        }
        let mods = kind_mods(kind);
        match self.rng.gen_range(0..10) {
            0 | 1 => and(
                self.gen(depth - 1, scope, sign, kind),
                self.gen(depth - 1, scope, sign, kind),
            ),
            2 | 3 => or(
                self.gen(depth - 1, scope, sign, kind),
                self.gen(depth - 1, scope, sign, kind),
            ),
            4 | 5 => md(
                mods[self.rng.gen_range(0..mods.len())],
                self.gen(depth - 1, scope, sign, kind),
            ),
            6 => Formula::DualMod(
                mods[self.rng.gen_range(0..mods.len())],
                Box::new(self.gen(depth - 1, scope, sign, kind)),
            ),
            7 | 8 => {
                let x = format!("v{}", self.fresh);
                self.fresh += 1;
                scope.push(x.clone());
                let body = self.gen(depth - 1, scope, sign, kind);
                scope.pop();
                let mu = match sign {
                    SignPolicy::MuOnly => true,
                    SignPolicy::NuOnly => false,
                    SignPolicy::Both => self.rng.gen_bool(0.5),
                };
                if mu {
                    Formula::Mu(x, Box::new(body))
                } else {
                    Formula::Nu(x, Box::new(body))
                }
            }
            _ => self.leaf(scope),
        }
    }

    /// A composition of pure-kind layers: a pure formula over `kinds[0]` with
    /// hole variables, each hole filled by a closed formula over the rest.
    fn gen_layers(&mut self, kinds: &[LayerKind], depth: usize) -> Formula {
        if kinds.is_empty() {
            // modality-free bottom layer
            return self.leaf(&[]);
        }
        let holes: Vec<String> = (0..2)
            .map(|_| {
                let h = format!("h{}", self.fresh);
                self.fresh += 1;
                h
            })
            .collect();
        let mut scope = holes.clone();
        let layer = self.gen(depth, &mut scope, SignPolicy::Both, Some(kinds[0]));
        let mut out = layer;
        for h in &holes {
            let inner = self.gen_layers(&kinds[1..], depth);
            out = out.substitute(h, &inner);
        }
        out
    }
}

fn basis_kinds(basis: Basis, rng: &mut ChaCha8Rng, layers: usize) -> Vec<LayerKind> {
    let [k0, k1] = basis.kinds();
    let first = rng.gen_bool(0.5);
    (0..layers)
        .map(|i| if (i % 2 == 0) == first { k0 } else { k1 })
        .collect()
}

/// Deterministic fragment-aware generator of closed formulas.
pub fn random_formula(frag: FragmentSpec, depth: usize, seed: u64) -> Formula {
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(seed), fresh: 0 };
    let mut scope = Vec::new();
    match frag {
        FragmentSpec::Any => g.gen(depth, &mut scope, SignPolicy::Both, None),
        FragmentSpec::NuOnly => g.gen(depth, &mut scope, SignPolicy::NuOnly, None),
        FragmentSpec::MuOnly => g.gen(depth, &mut scope, SignPolicy::MuOnly, None),
        FragmentSpec::PureKind(k) => g.gen(depth, &mut scope, SignPolicy::Both, Some(k)),
        FragmentSpec::Br | FragmentSpec::Bma => {
            let basis = if frag == FragmentSpec::Br { Basis::Br } else { Basis::Bma };
            let layers = 1 + g.rng.gen_range(0..depth.max(1)).min(2);
            let kinds = basis_kinds(basis, &mut g.rng, layers);
            let per_layer = (depth / layers).max(1);
            g.gen_layers(&kinds, per_layer)
        }
    }
}

/// Convenience: F^g a as a named acceptor-building block in tests.
pub fn fut_global(a: Formula) -> Formula {
    Formula::Mu("z".into(), Box::new(or(a, md(crate::formula::XG, var("z")))))
}
