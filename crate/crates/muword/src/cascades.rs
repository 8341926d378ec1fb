//! Cascades of global/class transducers and of class-memory transducers:
//! run semantics, compilation from BMA and BR sentences, and decompilation
//! back into formulas.

use crate::dataword::{DataWord, Marking};
use crate::formula::{
    and, big_and, big_or, md, or, Atom0, Dir, FixKind, Formula, Mod1, Mode, VectorialFormula,
};
use crate::fragments::{comp_height, Basis, Decomposition, LayerKind};
use crate::wordautomata::{marking_transducer, run_formulas, LayerAlphabet, Nfa, Transducer, Val};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CascadeError {
    #[error("letter {0:?} is not in the cascade's input alphabet")]
    AlphabetMismatch(String),
    #[error("formula is not in the {0:?} fragment")]
    NotInFragment(Basis),
    #[error("construction not expressible: {0}")]
    Unsupported(String),
    #[error("malformed cascade: {0}")]
    Malformed(String),
}

/// What a stage transducer reads at each position: the current letter of the
/// intermediate alphabet plus the position's 1-type.
pub type SLetter = (String, Marking);

const MARKINGS: [Marking; 4] = [
    Marking { pred: false, succ: false },
    Marking { pred: false, succ: true },
    Marking { pred: true, succ: false },
    Marking { pred: true, succ: true },
];

/// One stage of a transducer cascade: a functional letter-to-letter
/// transducer applied to the marked string projection (global) or to every
/// marked class projection (class).
#[derive(Clone, Debug, Serialize)]
pub struct Stage {
    pub mode: Mode,
    pub t: Transducer<SLetter, String>,
}

impl Stage {
    pub fn input_letters(&self) -> Vec<String> {
        let mut v: Vec<String> =
            self.t.nfa.alphabet.iter().map(|((l, _), _)| l.clone()).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn output_letters(&self) -> Vec<String> {
        let mut v: Vec<String> = self.t.nfa.alphabet.iter().map(|(_, o)| o.clone()).collect();
        v.sort();
        v.dedup();
        v
    }
}

/// A cascade ⟨Σ0, A1, Σ1, …, An, Σn⟩. `accept`, when present, additionally
/// requires the output letter at position 1 to be in the given set (used by
/// compiled cascades, whose last stage emits the truth of the sentence).
#[derive(Clone, Debug, Serialize)]
pub struct Cascade {
    pub input: Vec<String>,
    pub stages: Vec<Stage>,
    pub accept: Option<BTreeSet<String>>,
}

fn project_letters(input: &[String], w: &DataWord) -> Result<Vec<String>, CascadeError> {
    (1..=w.len())
        .map(|i| {
            let l = w.letter(i);
            if input.iter().any(|x| x == l) {
                Ok(l.to_string())
            } else {
                Ok(String::new())
            }
        })
        .collect()
}

fn run_stage(
    stage: &Stage,
    letters: &[String],
    w: &DataWord,
) -> Result<Option<Vec<String>>, CascadeError> {
    let known = stage.input_letters();
    let lookup = |i: usize| -> Result<SLetter, CascadeError> {
        let l = &letters[i - 1];
        if !known.iter().any(|x| x == l) {
            return Err(CascadeError::AlphabetMismatch(l.clone()));
        }
        Ok((l.clone(), w.one_type(i).unwrap()))
    };
    let run = |input: &[SLetter]| -> Result<Option<Vec<String>>, CascadeError> {
        stage
            .t
            .output(input)
            .map_err(|e| CascadeError::Malformed(format!("stage not functional: {e}")))
    };
    match stage.mode {
        Mode::Global => {
            let input: Vec<SLetter> =
                (1..=w.len()).map(&lookup).collect::<Result<_, _>>()?;
            run(&input)
        }
        Mode::Class => {
            let (_, classes) = w.projections();
            let mut out = vec![String::new(); w.len()];
            for cls in classes {
                let input: Vec<SLetter> =
                    cls.positions.iter().map(|&i| lookup(i)).collect::<Result<_, _>>()?;
                match run(&input)? {
                    None => return Ok(None),
                    Some(os) => {
                        for (p, o) in cls.positions.iter().zip(os) {
                            out[p - 1] = o;
                        }
                    }
                }
            }
            Ok(Some(out))
        }
    }
}

/// Feed the word through every stage; None if some stage has no successful
/// run. Data values are preserved, letters are relabeled.
pub fn run_cascade(c: &Cascade, w: &DataWord) -> Result<Option<DataWord>, CascadeError> {
    let mut letters = project_letters(&c.input, w)?;
    for stage in &c.stages {
        match run_stage(stage, &letters, w)? {
            None => return Ok(None),
            Some(next) => letters = next,
        }
    }
    let values = (1..=w.len()).map(|i| w.value(i)).collect();
    Ok(Some(DataWord::new(letters, values).unwrap()))
}

/// Successful run exists, and (when `accept` is set) position 1 carries an
/// accepting output letter.
pub fn cascade_accepts(c: &Cascade, w: &DataWord) -> Result<bool, CascadeError> {
    match run_cascade(c, w)? {
        None => Ok(false),
        Some(out) => Ok(match &c.accept {
            None => true,
            Some(set) => !out.is_empty() && set.contains(out.letter(1)),
        }),
    }
}

/// Concatenate two cascades; the second must understand every output letter
/// of the first.
pub fn compose(c1: &Cascade, c2: &Cascade) -> Result<Cascade, CascadeError> {
    let out1: Vec<String> = match c1.stages.last() {
        Some(s) => s.output_letters(),
        None => c1.input.clone(),
    };
    let in2: BTreeSet<String> = match c2.stages.first() {
        Some(s) => s.input_letters().into_iter().collect(),
        None => c2.input.iter().cloned().collect(),
    };
    for l in &out1 {
        if !in2.contains(l) {
            return Err(CascadeError::AlphabetMismatch(l.clone()));
        }
    }
    let mut stages = c1.stages.clone();
    stages.extend(c2.stages.clone());
    Ok(Cascade { input: c1.input.clone(), stages, accept: c2.accept.clone() })
}

/// Pairing of two stages of the same mode over the same input: the product
/// computes both outputs, encoded as "left*right".
pub fn stage_product(a: &Stage, b: &Stage) -> Result<Stage, CascadeError> {
    if a.mode != b.mode {
        return Err(CascadeError::Malformed("product of mixed-mode stages".into()));
    }
    let idx = |s: usize, t: usize| s * b.t.nfa.states + t;
    let mut transitions = BTreeSet::new();
    for (s1, (i1, o1), d1) in &a.t.nfa.transitions {
        for (s2, (i2, o2), d2) in &b.t.nfa.transitions {
            if i1 == i2 {
                transitions.insert((
                    idx(*s1, *s2),
                    (i1.clone(), format!("{o1}*{o2}")),
                    idx(*d1, *d2),
                ));
            }
        }
    }
    let pairs = |xs: &BTreeSet<usize>, ys: &BTreeSet<usize>| {
        xs.iter().flat_map(|&x| ys.iter().map(move |&y| idx(x, y))).collect::<BTreeSet<_>>()
    };
    let mut alphabet: Vec<(SLetter, String)> =
        transitions.iter().map(|(_, l, _)| l.clone()).collect();
    alphabet.sort();
    alphabet.dedup();
    Ok(Stage {
        mode: a.mode,
        t: Transducer {
            nfa: Nfa {
                alphabet,
                states: a.t.nfa.states * b.t.nfa.states,
                transitions,
                initial: pairs(&a.t.nfa.initial, &b.t.nfa.initial),
                finals: pairs(&a.t.nfa.finals, &b.t.nfa.finals),
            },
        },
    })
}

// ---------------------------------------------------------------------------
// Intermediate alphabets
// ---------------------------------------------------------------------------

/// An intermediate alphabet: a base letter (one of the input propositions, or
/// "" for anything else) refined with named truth bits accumulated by the
/// stages below. A letter is spelled base|+x-y… with bits in sorted order.
#[derive(Clone, Debug)]
struct Coding {
    base: Vec<String>,
    bits: Vec<String>,
}

impl Coding {
    fn name(&self, base: &str, bits: &BTreeMap<String, bool>) -> String {
        if self.bits.is_empty() {
            return base.to_string();
        }
        let mut s = format!("{base}|");
        for b in &self.bits {
            s.push(if bits[b] { '+' } else { '-' });
            s.push_str(b);
        }
        s
    }

    /// (name, base, bits) for every letter of the alphabet.
    fn letters(&self) -> Vec<(String, String, BTreeMap<String, bool>)> {
        let mut bases = self.base.clone();
        bases.push(String::new());
        let mut out = Vec::new();
        for base in &bases {
            for mask in 0..(1u32 << self.bits.len()) {
                let bits: BTreeMap<String, bool> = self
                    .bits
                    .iter()
                    .enumerate()
                    .map(|(i, b)| (b.clone(), mask >> i & 1 == 1))
                    .collect();
                out.push((self.name(base, &bits), base.clone(), bits));
            }
        }
        out
    }

    fn extend(&self, new: &[String]) -> Coding {
        let mut bits = self.bits.clone();
        bits.extend(new.iter().cloned());
        bits.sort();
        bits.dedup();
        Coding { base: self.base.clone(), bits }
    }
}

/// Decode "base|+x-y" back into (base, bits).
fn decode(name: &str) -> (String, BTreeMap<String, bool>) {
    match name.split_once('|') {
        None => (name.to_string(), BTreeMap::new()),
        Some((base, rest)) => {
            let mut bits = BTreeMap::new();
            let mut cur = String::new();
            let mut sign = true;
            for ch in rest.chars() {
                if ch == '+' || ch == '-' {
                    if !cur.is_empty() {
                        bits.insert(cur.clone(), sign);
                        cur.clear();
                    }
                    sign = ch == '+';
                } else {
                    cur.push(ch);
                }
            }
            if !cur.is_empty() {
                bits.insert(cur, sign);
            }
            (base.to_string(), bits)
        }
    }
}

// ---------------------------------------------------------------------------
// Decomposition levels
// ---------------------------------------------------------------------------

/// Fold children of the same kind into their parent's skeleton so that
/// levels of the decomposition alternate strictly; comp-height minimality
/// guarantees the folded tree has the same height.
fn fold_same_kind(d: &Decomposition) -> Decomposition {
    let mut skeleton = d.skeleton.clone();
    let mut children = Vec::new();
    for (hole, c) in &d.children {
        let c = fold_same_kind(c);
        if c.kind == d.kind {
            skeleton = skeleton.substitute(hole, &c.skeleton);
            children.extend(c.children);
        } else {
            children.push((hole.clone(), c));
        }
    }
    Decomposition { kind: d.kind, skeleton, children }
}

/// A bit name for the root node that cannot clash with a proposition or a
/// hole name.
fn root_bit(phi: &Formula) -> String {
    let props = phi.props();
    let mut name = "out".to_string();
    while props.contains(&name) {
        name.push('_');
    }
    name
}

/// Nodes grouped by depth (root at depth 0); every level must be pure in a
/// single kind after folding, and node names must be pairwise distinct
/// (they become bits of the intermediate alphabets).
fn levels(
    d: &Decomposition,
    root: &str,
) -> Result<Vec<(LayerKind, Vec<(String, Formula)>)>, CascadeError> {
    let mut out: Vec<(LayerKind, Vec<(String, Formula)>)> = Vec::new();
    fn walk(
        name: &str,
        d: &Decomposition,
        depth: usize,
        out: &mut Vec<(LayerKind, Vec<(String, Formula)>)>,
    ) -> Result<(), CascadeError> {
        if out.len() == depth {
            out.push((d.kind, Vec::new()));
        }
        if out[depth].0 != d.kind {
            return Err(CascadeError::Malformed("mixed kinds at one level".into()));
        }
        out[depth].1.push((name.to_string(), d.skeleton.clone()));
        for (hole, c) in &d.children {
            walk(hole, c, depth + 1, out)?;
        }
        Ok(())
    }
    walk(root, d, 0, &mut out)?;
    let mut names: Vec<&String> =
        out.iter().flat_map(|(_, ns)| ns.iter().map(|(n, _)| n)).collect();
    names.sort();
    let n = names.len();
    names.dedup();
    if names.len() != n {
        return Err(CascadeError::Malformed("duplicate node names in decomposition".into()));
    }
    Ok(out)
}

fn mentioned_atoms(f: &Formula, out: &mut BTreeSet<Atom0>) {
    match f {
        Formula::Atom(a) | Formula::NegAtom(a) => {
            out.insert(*a);
        }
        _ => {
            for c in f.children() {
                mentioned_atoms(c, out);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// BMA → cascade
// ---------------------------------------------------------------------------

/// Build the stage transducer of one pure-mode level: the product of the
/// level's marking transducers, reading the coded previous alphabet and
/// passing its content through extended with each node's truth bit.
fn transducer_stage(
    nodes: &[(String, Formula)],
    mode: Mode,
    input: &Coding,
) -> Result<(Stage, Coding), CascadeError> {
    // compile each node over its own layer alphabet
    let mut compiled = Vec::new();
    for (name, skel) in nodes {
        let letters: Vec<String> = skel.props().into_iter().collect();
        let holes: Vec<String> = skel.free_vars().into_iter().collect();
        let mut mentioned = BTreeSet::new();
        mentioned_atoms(skel, &mut mentioned);
        let mut preds = holes;
        for a in [Atom0::S, Atom0::P, Atom0::FirstG, Atom0::LastG, Atom0::FirstC, Atom0::LastC]
        {
            if !mentioned.contains(&a) {
                continue;
            }
            match (mode, a) {
                // own-mode boundaries are positional in the (projected) word
                (Mode::Global, Atom0::FirstG) | (Mode::Global, Atom0::LastG) => {}
                (Mode::Class, Atom0::FirstC) | (Mode::Class, Atom0::LastC) => {}
                // the marking only records adjacent class neighbours, so
                // foreign boundaries are not functions of the stage's input
                (Mode::Global, Atom0::FirstC)
                | (Mode::Global, Atom0::LastC)
                | (Mode::Class, Atom0::FirstG)
                | (Mode::Class, Atom0::LastG) => {
                    return Err(CascadeError::Unsupported(format!(
                        "{} inside a {mode:?} layer is not a function of the stage input",
                        a.name()
                    )));
                }
                _ => preds.push(a.name().to_string()),
            }
        }
        let alpha = LayerAlphabet { mode, letters, preds };
        let t = marking_transducer(skel, &alpha)
            .map_err(|e| CascadeError::Malformed(format!("layer compilation: {e}")))?;
        compiled.push((name.clone(), alpha, t));
    }
    // per-node transition index keyed by (state, valuation)
    let step: Vec<BTreeMap<(usize, &Val), Vec<(bool, usize)>>> = compiled
        .iter()
        .map(|(_, _, t)| {
            let mut m: BTreeMap<(usize, &Val), Vec<(bool, usize)>> = BTreeMap::new();
            for (s, (v, b), d) in &t.nfa.transitions {
                m.entry((*s, v)).or_default().push((*b, *d));
            }
            m
        })
        .collect();
    let sizes: Vec<usize> = compiled.iter().map(|(_, _, t)| t.nfa.states).collect();
    let n_prod: usize = sizes.iter().product();
    let unpack = |mut s: usize| -> Vec<usize> {
        let mut v = Vec::new();
        for k in &sizes {
            v.push(s % k);
            s /= k;
        }
        v
    };
    let pack = |v: &[usize]| -> usize {
        let mut s = 0;
        for (x, k) in v.iter().zip(&sizes).rev() {
            s = s * k + x;
        }
        s
    };
    let out_coding =
        input.extend(&nodes.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>());
    // the valuation each node sees for a coded input letter and marking
    let node_val = |alpha: &LayerAlphabet, base: &str, bits: &BTreeMap<String, bool>, m: Marking| {
        let letter = if alpha.letters.iter().any(|x| x == base) {
            base.to_string()
        } else {
            String::new()
        };
        let preds = alpha
            .preds
            .iter()
            .filter(|p| match p.as_str() {
                "S" => m.succ,
                "P" => m.pred,
                other => bits.get(other).copied().unwrap_or(false),
            })
            .cloned()
            .collect();
        Val { letter, preds }
    };
    let mut transitions: BTreeSet<(usize, (SLetter, String), usize)> = BTreeSet::new();
    for (name, base, bits) in input.letters() {
        for m in MARKINGS {
            let vals: Vec<Val> =
                compiled.iter().map(|(_, a, _)| node_val(a, &base, &bits, m)).collect();
            for s in 0..n_prod {
                let parts = unpack(s);
                // cartesian product of the per-node moves
                let mut combos: Vec<(Vec<usize>, BTreeMap<String, bool>)> =
                    vec![(Vec::new(), bits.clone())];
                for (k, (nname, _, _)) in compiled.iter().enumerate() {
                    let moves = match step[k].get(&(parts[k], &vals[k])) {
                        Some(v) => v,
                        None => {
                            combos.clear();
                            break;
                        }
                    };
                    let mut next = Vec::new();
                    for (dsts, obits) in &combos {
                        for (b, d) in moves {
                            let mut ds = dsts.clone();
                            ds.push(*d);
                            let mut ob = obits.clone();
                            ob.insert(nname.clone(), *b);
                            next.push((ds, ob));
                        }
                    }
                    combos = next;
                }
                for (dsts, obits) in combos {
                    transitions.insert((
                        s,
                        ((name.clone(), m), out_coding.name(&base, &obits)),
                        pack(&dsts),
                    ));
                }
            }
        }
    }
    let all = |sets: Vec<&BTreeSet<usize>>| -> BTreeSet<usize> {
        let mut acc = vec![Vec::new()];
        for set in sets {
            let mut next = Vec::new();
            for v in &acc {
                for &x in set {
                    let mut v2 = v.clone();
                    v2.push(x);
                    next.push(v2);
                }
            }
            acc = next;
        }
        acc.iter().map(|v| pack(v)).collect()
    };
    let initial = all(compiled.iter().map(|(_, _, t)| &t.nfa.initial).collect());
    let finals = all(compiled.iter().map(|(_, _, t)| &t.nfa.finals).collect());
    let mut alphabet: Vec<(SLetter, String)> =
        transitions.iter().map(|(_, l, _)| l.clone()).collect();
    alphabet.sort();
    alphabet.dedup();
    let nfa = Nfa { alphabet, states: n_prod, transitions, initial, finals }.trim();
    Ok((Stage { mode, t: Transducer { nfa } }, out_coding))
}

/// Relabel a stage's output letters.
fn project_outputs(stage: &Stage, f: impl Fn(&str) -> String) -> Stage {
    let nfa = stage.t.nfa.project(|((i, m), o): &(SLetter, String)| ((i.clone(), *m), f(o)));
    Stage {
        mode: stage.mode,
        t: Transducer {
            nfa: Nfa {
                alphabet: nfa.alphabet,
                states: nfa.states,
                transitions: nfa.transitions,
                initial: nfa.initial,
                finals: nfa.finals,
            },
        },
    }
}

/// Compile a BMA sentence into a cascade of the same height (twice the
/// height with `sequential`, via the Elgot–Mezei split). The last stage
/// emits 1/0 for the truth of the sentence; acceptance is "1 at position 1".
pub fn bma_to_cascade(phi: &Formula, sequential: bool) -> Result<Cascade, CascadeError> {
    let (_, d) =
        comp_height(phi, Basis::Bma).ok_or(CascadeError::NotInFragment(Basis::Bma))?;
    let d = fold_same_kind(&d);
    let root = root_bit(phi);
    let lv = levels(&d, &root)?;
    let base: Vec<String> = phi.props().into_iter().collect();
    let mut coding = Coding { base: base.clone(), bits: Vec::new() };
    let mut stages = Vec::new();
    for (kind, nodes) in lv.iter().rev() {
        let mode = match kind {
            LayerKind::ModeK(m) => *m,
            LayerKind::DirK(_) => {
                return Err(CascadeError::Malformed("direction layer in a BMA witness".into()))
            }
        };
        let (stage, next) = transducer_stage(nodes, mode, &coding)?;
        stages.push(stage);
        coding = next;
    }
    // last stage: keep only the root truth bit
    if let Some(last) = stages.pop() {
        stages.push(project_outputs(&last, |o| {
            let (_, bits) = decode(o);
            if bits[&root] { "1".into() } else { "0".into() }
        }));
    }
    if sequential {
        let mut seq = Vec::new();
        for s in &stages {
            let (l, r) = sequentialize_stage(s)?;
            seq.push(l);
            seq.push(r);
        }
        stages = seq;
    }
    Ok(Cascade { input: base, stages, accept: Some(["1".to_string()].into()) })
}

// ---------------------------------------------------------------------------
// Elgot–Mezei split of a stage
// ---------------------------------------------------------------------------

/// Split a functional stage into a left-sequential stage annotating each
/// letter with the subset of states reachable on the strict prefix, and a
/// right-sequential stage resolving the unique output backwards.
pub fn sequentialize_stage(stage: &Stage) -> Result<(Stage, Stage), CascadeError> {
    let t = &stage.t.nfa;
    let inputs: Vec<SLetter> = {
        let mut v: Vec<SLetter> = t.alphabet.iter().map(|(i, _)| i.clone()).collect();
        v.sort();
        v.dedup();
        v
    };
    // left pass: subset automaton, output = letter annotated with the subset
    // reachable before the position
    let mut subsets: Vec<BTreeSet<usize>> = vec![t.initial.clone()];
    let mut left_transitions: BTreeSet<(usize, (SLetter, String), usize)> = BTreeSet::new();
    let mut i = 0;
    while i < subsets.len() {
        let cur = subsets[i].clone();
        for l in &inputs {
            let mut next = BTreeSet::new();
            for (s, (il, _), d) in &t.transitions {
                if cur.contains(s) && il == l {
                    next.insert(*d);
                }
            }
            if next.is_empty() {
                continue;
            }
            let id = match subsets.iter().position(|x| *x == next) {
                Some(id) => id,
                None => {
                    subsets.push(next);
                    subsets.len() - 1
                }
            };
            left_transitions.insert((i, (l.clone(), format!("{}@{}", l.0, i)), id));
        }
        i += 1;
    }
    let left = Stage {
        mode: stage.mode,
        t: Transducer {
            nfa: Nfa {
                alphabet: left_transitions.iter().map(|(_, l, _)| l.clone()).collect(),
                states: subsets.len(),
                transitions: left_transitions,
                initial: [0].into(),
                finals: (0..subsets.len()).collect(),
            },
        },
    };
    // right pass: backwards subset construction over annotated letters
    let mut rsets: Vec<BTreeSet<usize>> = vec![t.finals.clone()];
    let mut right_transitions: BTreeSet<(usize, (SLetter, String), usize)> = BTreeSet::new();
    let mut i = 0;
    while i < rsets.len() {
        let cur = rsets[i].clone();
        for l in &inputs {
            for (sid, before) in subsets.iter().enumerate() {
                let mut pre = BTreeSet::new();
                let mut out: Option<&String> = None;
                let mut ambiguous = false;
                for (s, (il, o), d) in &t.transitions {
                    if il == l && cur.contains(d) && before.contains(s) {
                        pre.insert(*s);
                        match out {
                            None => out = Some(o),
                            Some(prev) if prev != o => ambiguous = true,
                            _ => {}
                        }
                    }
                }
                // annotated inputs produced by the left pass never reach an
                // ambiguous choice (functionality); others are dropped
                if pre.is_empty() || ambiguous {
                    continue;
                }
                let id = match rsets.iter().position(|x| *x == pre) {
                    Some(id) => id,
                    None => {
                        rsets.push(pre);
                        rsets.len() - 1
                    }
                };
                right_transitions.insert((
                    id,
                    ((format!("{}@{}", l.0, sid), l.1), out.unwrap().clone()),
                    i,
                ));
            }
        }
        i += 1;
    }
    let right = Stage {
        mode: stage.mode,
        t: Transducer {
            nfa: Nfa {
                alphabet: right_transitions.iter().map(|(_, l, _)| l.clone()).collect(),
                states: rsets.len(),
                transitions: right_transitions,
                initial: rsets
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.intersection(&t.initial).next().is_some())
                    .map(|(i, _)| i)
                    .collect(),
                finals: [0].into(),
            },
        },
    };
    Ok((left, right))
}

// ---------------------------------------------------------------------------
// Cascade → formula
// ---------------------------------------------------------------------------

fn marking_test(m: Marking) -> Formula {
    let p = if m.pred { Formula::Atom(Atom0::P) } else { Formula::NegAtom(Atom0::P) };
    let s = if m.succ { Formula::Atom(Atom0::S) } else { Formula::NegAtom(Atom0::S) };
    and(p, s)
}

fn initial_letter_formulas(input: &[String], letters: &[String]) -> BTreeMap<String, Formula> {
    let mut map = BTreeMap::new();
    for l in letters {
        let f = if l.is_empty() {
            big_and(input.iter().map(|p| Formula::NegProp(p.clone())).collect())
        } else {
            Formula::Prop(l.clone())
        };
        map.insert(l.clone(), f);
    }
    map
}

/// Everywhere-on-the-word closure of a per-position formula, as a sentence.
fn everywhere(f: Formula) -> Formula {
    Formula::Nu(
        "zz".into(),
        Box::new(and(f, Formula::DualMod(crate::formula::XG, Box::new(Formula::Var("zz".into()))))),
    )
}

/// Decompile a cascade into an equivalent sentence: per stage, each output
/// letter becomes a formula via the reachability/co-reachability systems;
/// stage letter tests are substituted through. Acceptance requires every
/// stage to have a run and, if the cascade filters, an accepting letter at
/// position 1.
pub fn cascade_to_formula(c: &Cascade) -> Result<Formula, CascadeError> {
    let mut map = match c.stages.first() {
        Some(s) => initial_letter_formulas(&c.input, &s.input_letters()),
        None => initial_letter_formulas(&c.input, &c.input),
    };
    let mut run_ok = Vec::new();
    for stage in &c.stages {
        // input letters the previous stage can never emit stay False
        let test = |(l, m): &SLetter| {
            and(map.get(l).cloned().unwrap_or(Formula::False), marking_test(*m))
        };
        let fs = run_formulas(&stage.t, stage.mode, &test);
        let any = big_or(fs.iter().map(|(_, f)| f.clone()).collect());
        run_ok.push(match stage.mode {
            Mode::Global => any,
            // every class must have a run: check at each class-first position
            Mode::Class => everywhere(or(Formula::NegAtom(Atom0::FirstC), any)),
        });
        map = fs.into_iter().collect();
    }
    let mut parts = run_ok;
    if let Some(set) = &c.accept {
        parts.push(big_or(
            map.iter().filter(|(l, _)| set.contains(*l)).map(|(_, f)| f.clone()).collect(),
        ));
    }
    Ok(big_and(parts).simplify().alpha_normalize())
}

// ---------------------------------------------------------------------------
// Class-memory transducers
// ---------------------------------------------------------------------------

/// The class-memory component of a transition: the state at the class
/// neighbour, or the boundary symbol (⊥ forward, ⊤ backward).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum CPred {
    State(usize),
    Bot,
    Top,
}

/// A deterministic class-memory transducer. Transitions are stored as the
/// set of tuples (q, class-memory, letter, marking, q', output); for a
/// backward machine the letter order and markings are those of the reversed
/// word.
#[derive(Clone, Debug, Serialize)]
pub struct Cmt {
    pub states: usize,
    pub input: Vec<String>,
    pub output: Vec<String>,
    pub delta: BTreeSet<(usize, CPred, String, Marking, usize, String)>,
    pub initial: usize,
    pub class_finals: BTreeSet<usize>,
    pub global_finals: BTreeSet<usize>,
    pub backward: bool,
}

impl Cmt {
    /// No two transitions share a (state, memory, letter, marking) key, and
    /// the boundary symbol matches the orientation.
    pub fn is_deterministic(&self) -> bool {
        let mut keys = BTreeSet::new();
        for (q, cp, a, m, _, _) in &self.delta {
            let bad = matches!(cp, CPred::Bot) && self.backward
                || matches!(cp, CPred::Top) && !self.backward;
            if bad || !keys.insert((q, cp, a, *m)) {
                return false;
            }
        }
        true
    }

    fn step(&self, q: usize, cp: CPred, a: &str, m: Marking) -> Option<(usize, String)> {
        self.delta
            .iter()
            .find(|(q2, cp2, a2, m2, _, _)| *q2 == q && *cp2 == cp && a2 == a && *m2 == m)
            .map(|(_, _, _, _, d, o)| (*d, o.clone()))
    }
}

/// The unique run of a CMT on a word (letters already projected into the
/// machine's input alphabet): the state sequence in reading order (initial
/// state first) and the outputs in position order. A backward machine is run
/// as a forward machine on the position-reversed word.
pub fn run_cmt(
    t: &Cmt,
    letters: &[String],
    w: &DataWord,
) -> Result<Option<(Vec<usize>, Vec<String>)>, CascadeError> {
    if !t.is_deterministic() {
        return Err(CascadeError::Malformed("CMT is not deterministic".into()));
    }
    let n = w.len();
    let (letters, w): (Vec<String>, DataWord) = if t.backward {
        let ls: Vec<String> = letters.iter().rev().cloned().collect();
        let vs: Vec<u64> = (1..=n).rev().map(|i| w.value(i)).collect();
        (ls.clone(), DataWord::new(ls, vs).unwrap())
    } else {
        (letters.to_vec(), w.clone())
    };
    let boundary = if t.backward { CPred::Top } else { CPred::Bot };
    let mut states = vec![t.initial];
    let mut out = Vec::new();
    for i in 1..=n {
        let l = &letters[i - 1];
        if !t.input.iter().any(|x| x == l) {
            return Err(CascadeError::AlphabetMismatch(l.clone()));
        }
        let cp = match w.class_predecessor(i).unwrap() {
            Some(j) => CPred::State(states[j]),
            None => boundary,
        };
        match t.step(states[i - 1], cp, l, w.one_type(i).unwrap()) {
            None => return Ok(None),
            Some((q, o)) => {
                states.push(q);
                out.push(o);
            }
        }
    }
    if !t.global_finals.contains(&states[n]) {
        return Ok(None);
    }
    for i in 1..=n {
        if w.class_successor(i).unwrap().is_none() && !t.class_finals.contains(&states[i]) {
            return Ok(None);
        }
    }
    if t.backward {
        out.reverse();
    }
    Ok(Some((states, out)))
}

/// A cascade of forward and backward CMTs.
#[derive(Clone, Debug, Serialize)]
pub struct CmtCascade {
    pub input: Vec<String>,
    pub stages: Vec<Cmt>,
    pub accept: Option<BTreeSet<String>>,
}

pub fn run_cmt_cascade(
    c: &CmtCascade,
    w: &DataWord,
) -> Result<Option<DataWord>, CascadeError> {
    let mut letters = project_letters(&c.input, w)?;
    for stage in &c.stages {
        match run_cmt(stage, &letters, w)? {
            None => return Ok(None),
            Some((_, out)) => letters = out,
        }
    }
    let values = (1..=w.len()).map(|i| w.value(i)).collect();
    Ok(Some(DataWord::new(letters, values).unwrap()))
}

pub fn cmt_cascade_accepts(c: &CmtCascade, w: &DataWord) -> Result<bool, CascadeError> {
    match run_cmt_cascade(c, w)? {
        None => Ok(false),
        Some(out) => Ok(match &c.accept {
            None => true,
            Some(set) => !out.is_empty() && set.contains(out.letter(1)),
        }),
    }
}

/// Product of two CMTs of the same orientation over the same input alphabet;
/// outputs are paired as "left*right".
pub fn cmt_product(a: &Cmt, b: &Cmt) -> Result<Cmt, CascadeError> {
    if a.backward != b.backward {
        return Err(CascadeError::Malformed("product of mixed orientations".into()));
    }
    let idx = |x: usize, y: usize| x * b.states + y;
    let mut delta = BTreeSet::new();
    for (q1, cp1, l1, m1, d1, o1) in &a.delta {
        for (q2, cp2, l2, m2, d2, o2) in &b.delta {
            if l1 != l2 || m1 != m2 {
                continue;
            }
            let cp = match (cp1, cp2) {
                (CPred::State(x), CPred::State(y)) => CPred::State(idx(*x, *y)),
                (CPred::Bot, CPred::Bot) => CPred::Bot,
                (CPred::Top, CPred::Top) => CPred::Top,
                _ => continue,
            };
            delta.insert((
                idx(*q1, *q2),
                cp,
                l1.clone(),
                *m1,
                idx(*d1, *d2),
                format!("{o1}*{o2}"),
            ));
        }
    }
    let cross = |xs: &BTreeSet<usize>, ys: &BTreeSet<usize>| {
        xs.iter().flat_map(|&x| ys.iter().map(move |&y| idx(x, y))).collect::<BTreeSet<_>>()
    };
    let mut output: Vec<String> = delta.iter().map(|(_, _, _, _, _, o)| o.clone()).collect();
    output.sort();
    output.dedup();
    Ok(Cmt {
        states: a.states * b.states,
        input: a.input.clone(),
        output,
        delta,
        initial: idx(a.initial, b.initial),
        class_finals: cross(&a.class_finals, &b.class_finals),
        global_finals: cross(&a.global_finals, &b.global_finals),
        backward: a.backward,
    })
}

/// Merge states that are indistinguishable both as run states and as class
/// memories, by partition refinement. The quotient is verified to be a
/// congruence; if it is not (which partition refinement cannot always
/// certify in one pass here), the machine is returned unchanged.
pub fn minimize_cmt(t: &Cmt) -> Cmt {
    let mut class: Vec<usize> = (0..t.states)
        .map(|q| {
            (t.class_finals.contains(&q) as usize) * 2 + t.global_finals.contains(&q) as usize
        })
        .collect();
    let renumber = |keys: Vec<(usize, Vec<u8>)>| -> Vec<usize> {
        let mut sorted: Vec<&(usize, Vec<u8>)> = keys.iter().collect();
        sorted.sort();
        sorted.dedup();
        keys.iter().map(|k| sorted.iter().position(|x| *x == k).unwrap()).collect()
    };
    loop {
        // signature of q: outgoing behaviour plus behaviour as a memory,
        // both up to the current partition
        let sigs: Vec<(usize, Vec<u8>)> = (0..t.states)
            .map(|q| {
                let mut outgoing = Vec::new();
                let mut as_memory = Vec::new();
                for (p, cp, a, m, d, o) in &t.delta {
                    let cpc = match cp {
                        CPred::State(s) => Some(class[*s]),
                        _ => None,
                    };
                    if *p == q {
                        outgoing.push(format!("{cpc:?}|{a}|{m:?}|{o}|{}", class[*d]));
                    }
                    if *cp == CPred::State(q) {
                        as_memory.push(format!("{}|{a}|{m:?}|{o}|{}", class[*p], class[*d]));
                    }
                }
                outgoing.sort();
                as_memory.sort();
                (class[q], format!("{outgoing:?}#{as_memory:?}").into_bytes())
            })
            .collect();
        let next = renumber(sigs);
        if next == class {
            break;
        }
        class = next;
    }
    // congruence check: equal classes must behave identically
    let mut image: BTreeMap<(usize, Option<usize>, &String, Marking), (usize, &String)> =
        BTreeMap::new();
    for (p, cp, a, m, d, o) in &t.delta {
        let cpc = match cp {
            CPred::State(s) => Some(class[*s]),
            _ => None,
        };
        let entry = (class[*d], o);
        if *image.entry((class[*p], cpc, a, *m)).or_insert(entry) != entry {
            return t.clone();
        }
    }
    let n = class.iter().max().map_or(0, |m| m + 1);
    let delta = t
        .delta
        .iter()
        .map(|(p, cp, a, m, d, o)| {
            let cp = match cp {
                CPred::State(s) => CPred::State(class[*s]),
                other => *other,
            };
            (class[*p], cp, a.clone(), *m, class[*d], o.clone())
        })
        .collect();
    Cmt {
        states: n,
        input: t.input.clone(),
        output: t.output.clone(),
        delta,
        initial: class[t.initial],
        class_finals: t.class_finals.iter().map(|&q| class[q]).collect(),
        global_finals: t.global_finals.iter().map(|&q| class[q]).collect(),
        backward: t.backward,
    }
}

/// Relabel a CMT's output letters.
fn map_cmt_outputs(t: &Cmt, f: impl Fn(&str) -> String) -> Cmt {
    let delta = t
        .delta
        .iter()
        .map(|(q, cp, a, m, d, o)| (*q, *cp, a.clone(), *m, *d, f(o)))
        .collect();
    let mut output: Vec<String> = t.output.iter().map(|o| f(o)).collect();
    output.sort();
    output.dedup();
    Cmt { delta, output, ..t.clone() }
}

// ---------------------------------------------------------------------------
// BR → CMT cascade
// ---------------------------------------------------------------------------

/// Swap the two reading directions of a (desugared) formula: X↔Y, first↔last
/// and S↔P. mirror(φ) holds at position i of w iff φ holds at the mirrored
/// position of the reversed word.
fn mirror(f: &Formula) -> Formula {
    use Formula::*;
    let flip_dir = |d: Dir| if d == Dir::X { Dir::Y } else { Dir::X };
    let flip_atom = |a: Atom0| match a {
        Atom0::S => Atom0::P,
        Atom0::P => Atom0::S,
        Atom0::FirstG => Atom0::LastG,
        Atom0::LastG => Atom0::FirstG,
        Atom0::FirstC => Atom0::LastC,
        Atom0::LastC => Atom0::FirstC,
    };
    match f {
        Mod(m, a) => Mod(Mod1 { dir: flip_dir(m.dir), mode: m.mode }, Box::new(mirror(a))),
        DualMod(m, a) => {
            DualMod(Mod1 { dir: flip_dir(m.dir), mode: m.mode }, Box::new(mirror(a)))
        }
        Atom(a) => Atom(flip_atom(*a)),
        NegAtom(a) => NegAtom(flip_atom(*a)),
        other => other.clone().map_children(|c| mirror(&c)),
    }
}

/// Rewrite dual modalities into boundary-atom disjunctions:
/// Ỹᵐφ = firstᵐ ∨ Yᵐφ and X̃ᵐφ = lastᵐ ∨ Xᵐφ.
fn expand_tilde(f: &Formula) -> Formula {
    match f {
        Formula::DualMod(m, a) => {
            let boundary = match (m.dir, m.mode) {
                (Dir::Y, Mode::Global) => Atom0::FirstG,
                (Dir::Y, Mode::Class) => Atom0::FirstC,
                (Dir::X, Mode::Global) => Atom0::LastG,
                (Dir::X, Mode::Class) => Atom0::LastC,
            };
            or(Formula::Atom(boundary), md(*m, expand_tilde(a)))
        }
        other => other.clone().map_children(|c| expand_tilde(&c)),
    }
}

const CMT_MAX_BASIS: usize = 14;

/// The subformula closure of a guarded ν-only past formula (with fixpoints
/// unfolded), as positive representatives. Only zeroary modalities actually
/// mentioned enter the basis.
fn closure_y(psi: &Formula) -> Result<Vec<Formula>, CascadeError> {
    use Formula::*;
    let mut basis: Vec<Formula> = Vec::new();
    let mut queue = vec![psi.clone()];
    while let Some(f) = queue.pop() {
        let f = match f {
            NegProp(p) => Prop(p),
            NegAtom(a) => Atom(a),
            other => other,
        };
        if matches!(f, True | False) || basis.contains(&f) {
            continue;
        }
        match &f {
            And(a, b) | Or(a, b) => {
                queue.push((**a).clone());
                queue.push((**b).clone());
            }
            Mod(m, a) => {
                if m.dir == Dir::X {
                    return Err(CascadeError::Unsupported(format!(
                        "future modality {} in a past layer",
                        m.name()
                    )));
                }
                queue.push((**a).clone());
            }
            Atom(Atom0::LastG) | Atom(Atom0::LastC) => {
                return Err(CascadeError::Unsupported(
                    "a last-position atom is not determined while reading forwards".into(),
                ));
            }
            Nu(x, body) => queue.push(body.substitute(x, &f)),
            Mu(..) => {
                return Err(CascadeError::Malformed("μ left in a ν-only layer".into()))
            }
            Var(x) => {
                return Err(CascadeError::Malformed(format!("free variable {x} in layer")))
            }
            DualMod(..) => return Err(CascadeError::Malformed("undesugared tilde".into())),
            _ => {}
        }
        basis.push(f);
        if basis.len() > CMT_MAX_BASIS {
            return Err(CascadeError::Unsupported(format!(
                "layer closure exceeds {CMT_MAX_BASIS} formulas"
            )));
        }
    }
    basis.sort();
    Ok(basis)
}

/// Forward CMT of one past layer: states are the atoms of the closure (plus
/// a fresh start state), transitions are forced by the consistency
/// conditions; it outputs the truth bit of the layer formula.
fn atom_cmt(psi: &Formula, bit: &str, input: &Coding) -> Result<Cmt, CascadeError> {
    use Formula::*;
    let basis = closure_y(psi)?;
    let atoms = crate::dataauto::enumerate_atoms(&basis);
    let member = |a: &BTreeSet<usize>, f: &Formula| -> bool {
        fn go(basis: &[Formula], a: &BTreeSet<usize>, f: &Formula) -> bool {
            match f {
                True => true,
                False => false,
                NegProp(p) => !go(basis, a, &Prop(p.clone())),
                NegAtom(x) => !go(basis, a, &Atom(*x)),
                other => basis
                    .iter()
                    .position(|g| g == other)
                    .map_or(false, |i| a.contains(&i)),
            }
        }
        go(&basis, a, f)
    };
    // the literal-level members: their bits determine the atom
    let forced: Vec<usize> = basis
        .iter()
        .enumerate()
        .filter(|(_, f)| matches!(f, Prop(_) | Atom(_) | Mod(..)))
        .map(|(i, _)| i)
        .collect();
    let mut by_sig: BTreeMap<Vec<bool>, usize> = BTreeMap::new();
    for (k, a) in atoms.iter().enumerate() {
        let sig: Vec<bool> = forced.iter().map(|i| a.contains(i)).collect();
        if by_sig.insert(sig, k).is_some() {
            return Err(CascadeError::Malformed(
                "two atoms share the same determined literals".into(),
            ));
        }
    }
    let letters = input.letters();
    // states: 0 = start, 1+k = atom k; explore only reachable (state, memory)
    // pairs so the transition table stays small
    let mut delta = BTreeSet::new();
    let mut reach: BTreeSet<usize> = [0].into();
    loop {
        let before = (reach.len(), delta.len());
        let prevs: Vec<usize> = reach.iter().copied().collect();
        let mems: Vec<CPred> = std::iter::once(CPred::Bot)
            .chain(prevs.iter().filter(|&&s| s > 0).map(|&s| CPred::State(s)))
            .collect();
        for &prev in &prevs {
            for &cp in &mems {
                for (name, base, bits) in &letters {
                    for m in MARKINGS {
                        let sig: Vec<bool> = forced
                            .iter()
                            .map(|&i| match &basis[i] {
                                Prop(p) => bits.get(p).copied().unwrap_or(p == base),
                                Atom(Atom0::S) => m.succ,
                                Atom(Atom0::P) => m.pred,
                                Atom(Atom0::FirstC) => cp == CPred::Bot,
                                Atom(Atom0::FirstG) => prev == 0,
                                Mod(mm, arg) if mm.dir == Dir::Y => match mm.mode {
                                    Mode::Global => prev > 0 && member(&atoms[prev - 1], arg),
                                    Mode::Class => match cp {
                                        CPred::State(j) => member(&atoms[j - 1], arg),
                                        _ => false,
                                    },
                                },
                                _ => unreachable!("non-literal in forced set"),
                            })
                            .collect();
                        // impossible (memory, marking, position) combinations:
                        // an adjacent class predecessor forces the memory to
                        // be the previous state, and position 1 has none
                        let consistent = match cp {
                            CPred::Bot => !m.pred,
                            CPred::State(j) => prev != 0 && (!m.pred || j == prev),
                            CPred::Top => false,
                        };
                        if !consistent {
                            continue;
                        }
                        if let Some(&k) = by_sig.get(&sig) {
                            let mut obits = bits.clone();
                            obits.insert(bit.to_string(), member(&atoms[k], psi));
                            delta.insert((
                                prev,
                                cp,
                                name.clone(),
                                m,
                                k + 1,
                                input.extend(&[bit.to_string()]).name(base, &obits),
                            ));
                            reach.insert(k + 1);
                        }
                    }
                }
            }
        }
        if (reach.len(), delta.len()) == before {
            break;
        }
    }
    // drop unreachable atoms and renumber
    let order: Vec<usize> = reach.iter().copied().collect();
    let renum = |s: usize| order.iter().position(|&x| x == s).unwrap();
    let delta: BTreeSet<_> = delta
        .into_iter()
        .map(|(q, cp, a, m, d, o)| {
            let cp = match cp {
                CPred::State(s) => CPred::State(renum(s)),
                other => other,
            };
            (renum(q), cp, a, m, renum(d), o)
        })
        .collect();
    let n = order.len() - 1;
    let all: BTreeSet<usize> = (0..=n).collect();
    let mut output: Vec<String> = delta.iter().map(|(_, _, _, _, _, o)| o.clone()).collect();
    output.sort();
    output.dedup();
    Ok(Cmt {
        states: n + 1,
        input: letters.iter().map(|(n, _, _)| n.clone()).collect(),
        output,
        delta,
        initial: 0,
        class_finals: all.clone(),
        global_finals: all,
        backward: false,
    })
}

/// Build one CMT stage for a direction-pure level: each node is converted to
/// guarded ν-only form (mirrored first for X layers), compiled to its atom
/// CMT, and the nodes are joined by product. The stage reads the coded
/// previous alphabet and extends it with the nodes' truth bits.
fn cmt_stage(
    nodes: &[(String, Formula)],
    dir: Dir,
    input: &Coding,
) -> Result<(Cmt, Coding), CascadeError> {
    let mut parts: Vec<Cmt> = Vec::new();
    for (name, skel) in nodes {
        let mut psi =
            expand_tilde(&crate::fragments::swap_mu_to_nu(&skel.to_guarded()).desugar());
        if dir == Dir::X {
            psi = mirror(&psi);
        }
        // hole predicates become letter bits of the coded alphabet
        for h in skel.free_vars() {
            psi = psi.substitute(&h, &Formula::Prop(h.clone()));
        }
        parts.push(minimize_cmt(&atom_cmt(&psi, name, input)?));
    }
    let mut joined = parts[0].clone();
    let mut names: Vec<&str> = vec![&nodes[0].0];
    for (k, p) in parts.iter().enumerate().skip(1) {
        joined = cmt_product(&joined, p)?;
        names.push(&nodes[k].0);
        // merge the paired outputs back into a single coded letter
        let merged_names = names.clone();
        let coding = input
            .extend(&merged_names.iter().map(|s| s.to_string()).collect::<Vec<_>>());
        joined = map_cmt_outputs(&joined, |o| {
            let mut bits = BTreeMap::new();
            let mut base = String::new();
            for part in o.split('*') {
                let (b, bs) = decode(part);
                base = b;
                bits.extend(bs);
            }
            coding.name(&base, &bits)
        });
    }
    let out = input.extend(&nodes.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>());
    if dir == Dir::X {
        // backward machine: reading-order boundary is ⊤
        joined.backward = true;
        joined.delta = joined
            .delta
            .iter()
            .map(|(q, cp, a, m, d, o)| {
                let cp = if *cp == CPred::Bot { CPred::Top } else { *cp };
                (*q, cp, a.clone(), *m, *d, o.clone())
            })
            .collect();
    }
    joined = minimize_cmt(&joined);
    Ok((joined, out))
}

/// Compile a BR sentence into a cascade of forward and backward CMTs of the
/// same height; the last stage emits 1/0 for the truth of the sentence.
pub fn br_to_cmt_cascade(phi: &Formula) -> Result<CmtCascade, CascadeError> {
    let (_, d) =
        comp_height(phi, Basis::Br).ok_or(CascadeError::NotInFragment(Basis::Br))?;
    let d = fold_same_kind(&d);
    let root = root_bit(phi);
    let lv = levels(&d, &root)?;
    let base: Vec<String> = phi.props().into_iter().collect();
    let mut coding = Coding { base: base.clone(), bits: Vec::new() };
    let mut stages = Vec::new();
    for (kind, nodes) in lv.iter().rev() {
        let dir = match kind {
            LayerKind::DirK(d) => *d,
            LayerKind::ModeK(_) => {
                return Err(CascadeError::Malformed("mode layer in a BR witness".into()))
            }
        };
        let (stage, next) = cmt_stage(nodes, dir, &coding)?;
        stages.push(stage);
        coding = next;
    }
    if let Some(last) = stages.pop() {
        stages.push(map_cmt_outputs(&last, |o| {
            let (_, bits) = decode(o);
            if bits[&root] { "1".into() } else { "0".into() }
        }));
    }
    Ok(CmtCascade { input: base, stages, accept: Some(["1".to_string()].into()) })
}

// ---------------------------------------------------------------------------
// CMT cascade → formula
// ---------------------------------------------------------------------------

/// Split the initial state if anything points back at it, so the per-state
/// formula system can treat it as "before position 1" only.
pub fn ensure_no_incoming(t: &Cmt) -> Cmt {
    let q0 = t.initial;
    let has_in = t
        .delta
        .iter()
        .any(|(_, cp, _, _, d, _)| *d == q0 || *cp == CPred::State(q0));
    if !has_in {
        return t.clone();
    }
    let fresh = t.states;
    let mut delta = t.delta.clone();
    for (q, cp, a, m, d, o) in &t.delta {
        if *q == q0 {
            delta.insert((fresh, *cp, a.clone(), *m, *d, o.clone()));
        }
    }
    let mut out = t.clone();
    out.states += 1;
    out.initial = fresh;
    out.delta = delta;
    if t.global_finals.contains(&q0) {
        out.global_finals.insert(fresh);
    }
    out
}

/// For each output letter of a CMT, a formula holding exactly where the
/// unique run emits it: the per-state ν system (recursion through the
/// reading direction), Bekić-linearized, with class/global finality checked
/// at the reading-final positions.
pub fn cmt_stage_formulas(
    t: &Cmt,
    letter_formula: &BTreeMap<String, Formula>,
) -> Result<Vec<(String, Formula)>, CascadeError> {
    if !t.is_deterministic() {
        return Err(CascadeError::Malformed("CMT is not deterministic".into()));
    }
    let t = ensure_no_incoming(t);
    // orientation: recursion modality, boundary/start/end atoms, and the
    // original-word reading of the stored markings
    let (gmod, cmod) = if t.backward {
        (crate::formula::XG, crate::formula::XC)
    } else {
        (crate::formula::YG, crate::formula::YC)
    };
    let start_atom = if t.backward { Atom0::LastG } else { Atom0::FirstG };
    let bound_atom = if t.backward { Atom0::LastC } else { Atom0::FirstC };
    let endg_atom = if t.backward { Atom0::FirstG } else { Atom0::LastG };
    let endc_atom = if t.backward { Atom0::FirstC } else { Atom0::LastC };
    let mark = |m: Marking| {
        if t.backward {
            marking_test(Marking { pred: m.succ, succ: m.pred })
        } else {
            marking_test(m)
        }
    };
    let xname = |q: usize| format!("x{q}");
    // group transitions so each variable occurs once per (source, memory,
    // target) edge
    type Key = (usize, CPred, usize);
    let mut edges: BTreeMap<(Key, String), Vec<(&String, Marking)>> = BTreeMap::new();
    for (q, cp, a, m, d, o) in &t.delta {
        let cp = match cp {
            CPred::State(s) => CPred::State(*s),
            _ => CPred::Bot, // boundary, uniform for grouping
        };
        edges.entry(((*q, cp, *d), o.clone())).or_default().push((a, *m));
    }
    let branch = |(q, cp, _d): &Key, tests: &[(&String, Marking)]| -> Formula {
        let test = big_or(
            tests
                .iter()
                .map(|(a, m)| {
                    // letters the previous stage never emits stay False
                    let lf = letter_formula.get(*a).cloned().unwrap_or(Formula::False);
                    and(lf, mark(*m))
                })
                .collect(),
        );
        let mut parts = Vec::new();
        if *q == t.initial {
            parts.push(Formula::Atom(start_atom));
        } else {
            parts.push(md(gmod, Formula::Var(xname(*q))));
        }
        match cp {
            CPred::State(s) => parts.push(md(cmod, Formula::Var(xname(*s)))),
            _ => {
                if *q != t.initial {
                    parts.push(Formula::Atom(bound_atom));
                }
            }
        }
        parts.push(test);
        big_and(parts)
    };
    let sys = VectorialFormula {
        kind: FixKind::Nu,
        components: (0..t.states)
            .map(|q| {
                let disj = edges
                    .iter()
                    .filter(|((k, _), _)| k.2 == q)
                    .map(|((k, _), tests)| branch(k, tests))
                    .collect();
                (xname(q), big_or(disj))
            })
            .collect(),
    };
    let phi_q: Vec<Formula> = (0..t.states)
        .map(|q| sys.bekic(&xname(q)).map_err(|e| CascadeError::Malformed(format!("{e}"))))
        .collect::<Result<_, _>>()?;
    let finality = |fs: &BTreeSet<usize>, at: Atom0| {
        or(
            Formula::NegAtom(at),
            big_or(fs.iter().map(|&q| phi_q[q].clone()).collect()),
        )
    };
    let fin = and(
        finality(&t.class_finals, endc_atom),
        finality(&t.global_finals, endg_atom),
    );
    Ok(t.output
        .iter()
        .map(|o| {
            let disj = edges
                .iter()
                .filter(|((_, ol), _)| ol == o)
                .map(|((k, _), tests)| {
                    let mut f = branch(k, tests);
                    for q in 0..t.states {
                        f = f.substitute(&xname(q), &phi_q[q]);
                    }
                    f
                })
                .collect();
            (o.clone(), and(fin.clone(), big_or(disj)).alpha_normalize())
        })
        .collect())
}

/// Decompile a CMT cascade into an equivalent sentence.
pub fn cmt_cascade_to_formula(c: &CmtCascade) -> Result<Formula, CascadeError> {
    let mut map = match c.stages.first() {
        Some(s) => initial_letter_formulas(&c.input, &s.input),
        None => initial_letter_formulas(&c.input, &c.input),
    };
    let mut parts = Vec::new();
    for stage in &c.stages {
        let fs = cmt_stage_formulas(stage, &map)?;
        // the run covers every position
        parts.push(everywhere(big_or(fs.iter().map(|(_, f)| f.clone()).collect())));
        map = fs.into_iter().collect();
    }
    if let Some(set) = &c.accept {
        parts.push(big_or(
            map.iter().filter(|(l, _)| set.contains(*l)).map(|(_, f)| f.clone()).collect(),
        ));
    }
    Ok(big_and(parts).simplify().alpha_normalize())
}

// ---------------------------------------------------------------------------
// Nondeterministic cascades as data automata
// ---------------------------------------------------------------------------

use crate::dataauto::DataAutomaton;

/// The product-alphabet simulation of a cascade by a data automaton: B
/// guesses the tuple of all intermediate letters at each position (plus the
/// marking) and verifies the global stages; C verifies the class stages on
/// each class projection. Output letters are indices into the tuple table.
pub fn cascade_to_da(c: &Cascade) -> Result<DataAutomaton, CascadeError> {
    // a tuple guesses the letters at one position of every intermediate
    // word (index 0 = the input itself) together with the position's 1-type
    let mut base_letters = c.input.clone();
    base_letters.push(String::new());
    let mut sigmas: Vec<Vec<String>> = vec![base_letters.clone()];
    sigmas.extend(c.stages.iter().map(|s| s.output_letters()));
    let mut tuples: Vec<Vec<String>> = vec![Vec::new()];
    for s in &sigmas {
        let mut next = Vec::new();
        for t in &tuples {
            for l in s {
                let mut t2 = t.clone();
                t2.push(l.clone());
                next.push(t2);
            }
        }
        tuples = next;
    }
    let tuples: Vec<(Vec<String>, Marking)> = tuples
        .into_iter()
        .flat_map(|t| MARKINGS.iter().map(move |m| (t.clone(), *m)))
        .collect();
    // B: product of global-stage states, plus a "first position" flag when
    // the cascade filters on the first output letter
    let g_idx: Vec<usize> = (0..c.stages.len())
        .filter(|&i| c.stages[i].mode == Mode::Global)
        .collect();
    let c_idx: Vec<usize> = (0..c.stages.len())
        .filter(|&i| c.stages[i].mode == Mode::Class)
        .collect();
    let sizes_g: Vec<usize> = g_idx.iter().map(|&i| c.stages[i].t.nfa.states).collect();
    let prod_g: usize = sizes_g.iter().product::<usize>().max(1);
    let pack = |v: &[usize], sizes: &[usize]| -> usize {
        let mut s = 0;
        for (x, k) in v.iter().zip(sizes).rev() {
            s = s * k + x;
        }
        s
    };
    let unpack = |mut s: usize, sizes: &[usize]| -> Vec<usize> {
        let mut v = Vec::new();
        for k in sizes {
            v.push(s % k);
            s /= k;
        }
        v
    };
    let cross = |sets: Vec<&BTreeSet<usize>>, sizes: &[usize]| -> BTreeSet<usize> {
        let mut acc = vec![Vec::new()];
        for set in sets {
            let mut next = Vec::new();
            for v in &acc {
                for &x in set {
                    let mut v2 = v.clone();
                    v2.push(x);
                    next.push(v2);
                }
            }
            acc = next;
        }
        acc.iter().map(|v| pack(v, sizes)).collect()
    };
    // B states: 2 * prod_g (flag says "position 1 not yet read")
    let enc = |flag: bool, s: usize| if flag { prod_g + s } else { s };
    let mut b_transitions: BTreeSet<(usize, ((String, Marking), usize), usize)> =
        BTreeSet::new();
    let mut b_alpha_in: Vec<(String, Marking)> = Vec::new();
    for l in &base_letters {
        for m in MARKINGS {
            b_alpha_in.push((l.clone(), m));
        }
    }
    for (ti, tup) in tuples.iter().enumerate() {
        let m = tup.1;
        {
            // B only reads a tuple over the matching (input letter, 1-type);
            // every global stage must step on its guessed input component
            // and output its guessed output component
            let l = &tup.0[0];
            for s in 0..prod_g {
                let parts = unpack(s, &sizes_g);
                let mut dests: Vec<Vec<usize>> = vec![Vec::new()];
                let mut dead = false;
                for (k, &gi) in g_idx.iter().enumerate() {
                    let in_l: String = tup.0[gi].clone();
                    let out_l = &tup.0[gi + 1];
                    let moves: Vec<usize> = c.stages[gi]
                        .t
                        .nfa
                        .transitions
                        .iter()
                        .filter(|(sq, (il, ol), _)| {
                            *sq == parts[k] && il.0 == in_l && il.1 == m && ol == out_l
                        })
                        .map(|(_, _, d)| *d)
                        .collect();
                    if moves.is_empty() {
                        dead = true;
                        break;
                    }
                    let mut next = Vec::new();
                    for v in &dests {
                        for &d in &moves {
                            let mut v2 = v.clone();
                            v2.push(d);
                            next.push(v2);
                        }
                    }
                    dests = next;
                }
                if dead {
                    continue;
                }
                for v in dests {
                    let d = pack(&v, &sizes_g);
                    b_transitions.insert((enc(false, s), ((l.clone(), m), ti), enc(false, d)));
                    // from the flagged copy, enforce the acceptance filter
                    let ok = match &c.accept {
                        None => true,
                        Some(set) => set.contains(tup.0.last().map(|s| s.as_str()).unwrap_or("")),
                    };
                    if ok {
                        b_transitions
                            .insert((enc(true, s), ((l.clone(), m), ti), enc(false, d)));
                    }
                }
            }
        }
    }
    let b_init_raw = cross(g_idx.iter().map(|&i| &c.stages[i].t.nfa.initial).collect(), &sizes_g);
    let b_fin_raw = cross(g_idx.iter().map(|&i| &c.stages[i].t.nfa.finals).collect(), &sizes_g);
    let b_initial: BTreeSet<usize> = b_init_raw.iter().map(|&s| enc(true, s)).collect();
    let mut b_finals: BTreeSet<usize> = b_fin_raw.iter().map(|&s| enc(false, s)).collect();
    if c.accept.is_none() {
        // the empty word: initial states are also flagged
        b_finals.extend(b_init_raw.iter().map(|&s| enc(true, s)).filter(|s| {
            b_fin_raw.iter().any(|&f| enc(true, f) == *s)
        }));
    }
    let mut b_alphabet = Vec::new();
    for l in &b_alpha_in {
        for ti in 0..tuples.len() {
            b_alphabet.push((l.clone(), ti));
        }
    }
    let b = Transducer {
        nfa: Nfa {
            alphabet: b_alphabet,
            states: 2 * prod_g,
            transitions: b_transitions,
            initial: b_initial,
            finals: b_finals,
        },
    };
    // C: product of class-stage states over the tuple alphabet
    let sizes_c: Vec<usize> = c_idx.iter().map(|&i| c.stages[i].t.nfa.states).collect();
    let prod_c: usize = sizes_c.iter().product::<usize>().max(1);
    let mut c_transitions = BTreeSet::new();
    for (ti, tup) in tuples.iter().enumerate() {
        let m = tup.1;
        for s in 0..prod_c {
            let parts = unpack(s, &sizes_c);
            let mut dests: Vec<Vec<usize>> = vec![Vec::new()];
            let mut dead = false;
            for (k, &ci) in c_idx.iter().enumerate() {
                let in_l = &tup.0[ci];
                let out_l = &tup.0[ci + 1];
                let moves: Vec<usize> = c.stages[ci]
                    .t
                    .nfa
                    .transitions
                    .iter()
                    .filter(|(sq, (il, ol), _)| {
                        *sq == parts[k] && il.0 == *in_l && il.1 == m && ol == out_l
                    })
                    .map(|(_, _, d)| *d)
                    .collect();
                if moves.is_empty() {
                    dead = true;
                    break;
                }
                let mut next = Vec::new();
                for v in &dests {
                    for &d in &moves {
                        let mut v2 = v.clone();
                        v2.push(d);
                        next.push(v2);
                    }
                }
                dests = next;
            }
            if dead {
                continue;
            }
            for v in dests {
                c_transitions.insert((s, ti, pack(&v, &sizes_c)));
            }
        }
    }
    let c_nfa = Nfa {
        alphabet: (0..tuples.len()).collect(),
        states: prod_c,
        transitions: c_transitions,
        initial: cross(c_idx.iter().map(|&i| &c.stages[i].t.nfa.initial).collect(), &sizes_c),
        finals: cross(c_idx.iter().map(|&i| &c.stages[i].t.nfa.finals).collect(), &sizes_c),
    };
    Ok(DataAutomaton { b, c: c_nfa, letters: c.input.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataword::enumerate_up_to;
    use crate::evaluator::models;

    fn words(alpha: &[&str], n: usize) -> Vec<DataWord> {
        let a: Vec<String> = alpha.iter().map(|s| s.to_string()).collect();
        enumerate_up_to(&a, n)
    }

    fn f(s: &str) -> Formula {
        Formula::parse(s).unwrap()
    }

    /// A one-state stage applying `out` to every (letter, marking).
    fn simple_stage(
        mode: Mode,
        letters: &[&str],
        out: impl Fn(&str, Marking) -> String,
    ) -> Stage {
        let mut transitions = BTreeSet::new();
        for l in letters {
            for m in MARKINGS {
                transitions.insert((0usize, ((l.to_string(), m), out(l, m)), 0usize));
            }
        }
        Stage {
            mode,
            t: Transducer {
                nfa: Nfa {
                    alphabet: transitions.iter().map(|(_, l, _)| l.clone()).collect(),
                    states: 1,
                    transitions,
                    initial: [0].into(),
                    finals: [0].into(),
                },
            },
        }
    }

    #[test]
    fn identity_cascade() {
        let c = Cascade {
            input: vec!["a".into(), "b".into()],
            stages: vec![simple_stage(Mode::Global, &["a", "b", ""], |l, _| l.to_string())],
            accept: None,
        };
        for w in words(&["a", "b"], 4) {
            let out = run_cascade(&c, &w).unwrap().unwrap();
            assert_eq!(out, w);
        }
    }

    #[test]
    fn class_stage_marks_class_first() {
        // two states: the initial position of each class projection gets
        // "first", the rest "rest"
        let mut transitions = BTreeSet::new();
        for m in MARKINGS {
            transitions.insert((0usize, (("a".to_string(), m), "first".to_string()), 1usize));
            transitions.insert((1usize, (("a".to_string(), m), "rest".to_string()), 1usize));
        }
        let stage = Stage {
            mode: Mode::Class,
            t: Transducer {
                nfa: Nfa {
                    alphabet: transitions.iter().map(|(_, l, _)| l.clone()).collect(),
                    states: 2,
                    transitions,
                    initial: [0].into(),
                    finals: [0, 1].into(),
                },
            },
        };
        let c = Cascade { input: vec!["a".into()], stages: vec![stage], accept: None };
        for w in words(&["a"], 4) {
            let out = run_cascade(&c, &w).unwrap().unwrap();
            for i in 1..=w.len() {
                let expect = if w.class_predecessor(i).unwrap().is_some() {
                    "rest"
                } else {
                    "first"
                };
                assert_eq!(out.letter(i), expect, "{w:?} at {i}");
            }
        }
    }

    #[test]
    fn compose_and_product() {
        let s1 = simple_stage(Mode::Global, &["a", ""], |l, _| {
            if l == "a" { "x".into() } else { "y".into() }
        });
        let s2 = simple_stage(Mode::Global, &["x", "y"], |l, _| l.to_uppercase());
        let c1 = Cascade { input: vec!["a".into()], stages: vec![s1.clone()], accept: None };
        let c2 = Cascade { input: vec!["x".into(), "y".into()], stages: vec![s2], accept: None };
        let c = compose(&c1, &c2).unwrap();
        let w = DataWord::parse("a[1] a[2] b[1]").unwrap_or_else(|_| {
            DataWord::new(vec!["a".into(), "a".into(), "".into()], vec![1, 2, 1]).unwrap()
        });
        let out = run_cascade(&c, &w).unwrap().unwrap();
        let ls: Vec<&str> = (1..=3).map(|i| out.letter(i)).collect();
        assert_eq!(ls, ["X", "X", "Y"]);
        // product pairs outputs
        let p = stage_product(&s1, &s1).unwrap();
        let cp = Cascade { input: vec!["a".into()], stages: vec![p], accept: None };
        let out = run_cascade(&cp, &w).unwrap().unwrap();
        assert_eq!(out.letter(1), "x*x");
    }

    fn assert_cascade_equiv(phi: &Formula, c: &Cascade, alpha: &[&str], n: usize) {
        for w in words(alpha, n) {
            if w.len() == 0 && c.accept.is_none() {
                continue;
            }
            let lhs = models(&w, phi).unwrap();
            let rhs = cascade_accepts(c, &w).unwrap();
            assert_eq!(lhs, rhs, "{phi:?} on {w:?}");
        }
    }

    #[test]
    fn bma_cascade_global_only() {
        let phi = f("Gg a");
        let c = bma_to_cascade(&phi, false).unwrap();
        assert_eq!(c.stages.len(), 1);
        assert_cascade_equiv(&phi, &c, &["a", "b"], 4);
    }

    #[test]
    fn bma_cascade_phi3() {
        let phi = f("mu x. ((nu y. q | Xc y) | Xg x | Yg x)");
        let c = bma_to_cascade(&phi, false).unwrap();
        assert_eq!(c.stages.len(), 2);
        assert_cascade_equiv(&phi, &c, &["q", "r"], 4);
    }

    #[test]
    fn bma_cascade_bridge_1() {
        let phi = f("Xg Xc a");
        let c = bma_to_cascade(&phi, false).unwrap();
        assert_eq!(c.stages.len(), 2);
        assert_cascade_equiv(&phi, &c, &["a", "b"], 4);
    }

    #[test]
    fn bma_cascade_sequential() {
        let phi = f("mu x. ((nu y. q | Xc y) | Xg x | Yg x)");
        let c = bma_to_cascade(&phi, true).unwrap();
        assert_eq!(c.stages.len(), 4);
        assert_cascade_equiv(&phi, &c, &["q", "r"], 4);
    }

    #[test]
    fn bma_not_in_fragment() {
        let phi = f("nu x. (Xc lastg | Xc Yg x)");
        assert!(matches!(
            bma_to_cascade(&phi, false),
            Err(CascadeError::NotInFragment(Basis::Bma))
        ));
    }

    #[test]
    fn cascade_roundtrip_formula() {
        for s in ["Gg a", "mu x. ((nu y. q | Xc y) | Xg x | Yg x)"] {
            let phi = f(s);
            let c = bma_to_cascade(&phi, false).unwrap();
            let psi = cascade_to_formula(&c).unwrap();
            let alpha: Vec<String> = c.input.clone();
            let alpha: Vec<&str> = alpha.iter().map(|s| s.as_str()).collect();
            for w in words(&alpha, 4) {
                assert_eq!(
                    models(&w, &phi).unwrap(),
                    models(&w, &psi).unwrap(),
                    "{s} on {w:?}"
                );
            }
        }
    }

    #[test]
    fn cascade_as_data_automaton() {
        let phi = f("mu x. ((nu y. q | Xc y) | Xg x | Yg x)");
        let c = bma_to_cascade(&phi, false).unwrap();
        let da = cascade_to_da(&c).unwrap();
        for w in words(&["q", "r"], 4) {
            assert_eq!(
                cascade_accepts(&c, &w).unwrap(),
                crate::dataauto::membership(&da, &w).unwrap(),
                "{w:?}"
            );
        }
    }

    /// Copy machine: one working state, any memory, outputs the letter.
    fn copy_cmt(letters: &[&str]) -> Cmt {
        let mut delta = BTreeSet::new();
        for l in letters {
            for m in MARKINGS {
                for cp in [CPred::Bot, CPred::State(1)] {
                    for q in [0usize, 1] {
                        delta.insert((q, cp, l.to_string(), m, 1usize, l.to_string()));
                    }
                }
            }
        }
        Cmt {
            states: 2,
            input: letters.iter().map(|s| s.to_string()).collect(),
            output: letters.iter().map(|s| s.to_string()).collect(),
            delta,
            initial: 0,
            class_finals: [0, 1].into(),
            global_finals: [0, 1].into(),
            backward: false,
        }
    }

    #[test]
    fn cmt_copies() {
        let t = copy_cmt(&["a", "b", ""]);
        assert!(t.is_deterministic());
        let c = CmtCascade {
            input: vec!["a".into(), "b".into()],
            stages: vec![t],
            accept: None,
        };
        for w in words(&["a", "b"], 4) {
            assert_eq!(run_cmt_cascade(&c, &w).unwrap().unwrap(), w);
        }
    }

    #[test]
    fn cmt_class_memory() {
        // outputs 1 at a position iff its class was seen before
        let mut delta = BTreeSet::new();
        for m in MARKINGS {
            for q in [0usize, 1] {
                delta.insert((q, CPred::Bot, "a".to_string(), m, 1usize, "0".to_string()));
                delta.insert((q, CPred::State(1), "a".to_string(), m, 1usize, "1".to_string()));
            }
        }
        let t = Cmt {
            states: 2,
            input: vec!["a".into()],
            output: vec!["0".into(), "1".into()],
            delta,
            initial: 0,
            class_finals: [0, 1].into(),
            global_finals: [0, 1].into(),
            backward: false,
        };
        let c = CmtCascade { input: vec!["a".into()], stages: vec![t], accept: None };
        for w in words(&["a"], 5) {
            let out = run_cmt_cascade(&c, &w).unwrap().unwrap();
            for i in 1..=w.len() {
                let seen = w.class_predecessor(i).unwrap().is_some();
                assert_eq!(out.letter(i) == "1", seen, "{w:?} at {i}");
            }
        }
    }

    fn assert_cmt_equiv(phi: &Formula, c: &CmtCascade, alpha: &[&str], n: usize) {
        for w in words(alpha, n) {
            if w.len() == 0 && c.accept.is_none() {
                continue;
            }
            assert_eq!(
                models(&w, phi).unwrap(),
                cmt_cascade_accepts(c, &w).unwrap(),
                "{phi:?} on {w:?}"
            );
        }
    }

    #[test]
    fn br_cmt_past_only() {
        let phi = f("Pc q");
        let c = br_to_cmt_cascade(&phi).unwrap();
        assert_eq!(c.stages.len(), 1);
        assert!(!c.stages[0].backward);
        assert_cmt_equiv(&phi, &c, &["q", "r"], 4);
    }

    #[test]
    fn br_cmt_bridge() {
        let phi = f("mu x. (Xg Xc x | a)");
        let c = br_to_cmt_cascade(&phi).unwrap();
        assert_eq!(c.stages.len(), 1);
        assert!(c.stages[0].backward);
        assert_cmt_equiv(&phi, &c, &["a", "b"], 4);
    }

    #[test]
    fn br_cmt_phi1() {
        let phi = f("nu x. (~Xc x | Xg mu y. (q & ~Yc y))");
        let c = br_to_cmt_cascade(&phi).unwrap();
        assert_eq!(c.stages.len(), 2);
        assert_cmt_equiv(&phi, &c, &["q", "r"], 4);
    }

    #[test]
    fn cmt_roundtrip_formula() {
        // a forward and a backward stage, small enough for Bekić
        for s in ["Pc q", "Xc a"] {
            let phi = f(s);
            let c = br_to_cmt_cascade(&phi).unwrap();
            let psi = cmt_cascade_to_formula(&c).unwrap();
            let alpha: Vec<String> = c.input.clone();
            let alpha: Vec<&str> = alpha.iter().map(|s| s.as_str()).collect();
            for w in words(&alpha, 4) {
                assert_eq!(
                    models(&w, &phi).unwrap(),
                    models(&w, &psi).unwrap(),
                    "{s} on {w:?}"
                );
            }
        }
    }

    #[test]
    fn cmt_partial_finality_decompiles() {
        // every class must end in state 2, i.e. have at least two members
        let mut delta = BTreeSet::new();
        for m in MARKINGS {
            for q in [0usize, 1, 2] {
                delta.insert((q, CPred::Bot, "a".to_string(), m, 1usize, "a".to_string()));
                for s in [1usize, 2] {
                    delta.insert((q, CPred::State(s), "a".to_string(), m, 2usize, "a".to_string()));
                }
            }
        }
        let t = Cmt {
            states: 3,
            input: vec!["a".into()],
            output: vec!["a".into()],
            delta,
            initial: 0,
            class_finals: [2].into(),
            global_finals: [0, 1, 2].into(),
            backward: false,
        };
        let c = CmtCascade { input: vec!["a".into()], stages: vec![t], accept: None };
        let psi = cmt_cascade_to_formula(&c).unwrap();
        for w in words(&["a"], 5) {
            if w.len() == 0 {
                continue;
            }
            assert_eq!(
                cmt_cascade_accepts(&c, &w).unwrap(),
                models(&w, &psi).unwrap(),
                "{w:?}"
            );
        }
    }
}
