//! Constructive content of the undecidability results: the
//! increasing-bijection formula and the PCP reduction.

use crate::dataword::DataWord;
use crate::formula::{and, md, or, wmd, Atom0, Formula, Mod1, XC, XG, YC};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReductionError {
    #[error("no marker letters left for this instance")]
    NoMarkers,
    #[error("instance words must be nonempty")]
    EmptyWord,
    #[error("index sequence is not a solution")]
    NotASolution,
    #[error("index sequences must be nonempty")]
    EmptySequence,
    #[error("tile index {0} out of range")]
    BadIndex(usize),
    #[error("bad instance JSON: {0}")]
    BadJson(String),
}

struct Fresh(usize);

impl Fresh {
    fn next(&mut self) -> String {
        self.0 += 1;
        format!("r{}", self.0)
    }
}

fn fix(nu: bool, x: String, body: Formula) -> Formula {
    if nu {
        Formula::Nu(x, Box::new(body))
    } else {
        Formula::Mu(x, Box::new(body))
    }
}

/// Reflexive eventually along m, with an explicit binder: fix x. φ ∨ m x.
/// The fixpoint is unique over finite words (each unfolding strictly
/// advances), so the binder kind is a free choice.
fn even(nu: bool, m: Mod1, phi: Formula, f: &mut Fresh) -> Formula {
    let x = f.next();
    fix(nu, x.clone(), or(phi, md(m, Formula::Var(x))))
}

/// Reflexive always along m: fix x. φ ∧ ~m x.
fn always(nu: bool, m: Mod1, phi: Formula, f: &mut Fresh) -> Formula {
    let x = f.next();
    fix(nu, x.clone(), and(phi, wmd(m, Formula::Var(x))))
}

/// Somewhere in the class (both directions): F^c P^c φ.
fn in_class(nu: bool, phi: Formula, f: &mut Fresh) -> Formula {
    let past = even(nu, YC, phi, f);
    even(nu, XC, past, f)
}

/// The class holds exactly one position labeled l.
fn exactly_one(nu: bool, l: &str, f: &mut Fresh) -> Formula {
    let none_later = wmd(XC, always(nu, XC, Formula::NegProp(l.to_string()), f));
    let none_earlier = wmd(YC, always(nu, YC, Formula::NegProp(l.to_string()), f));
    let uniq = and(Formula::Prop(l.to_string()), and(none_later, none_earlier));
    in_class(nu, uniq, f)
}

/// ~ restricted to la-positions × lb-positions is a bijection: each la has
/// exactly one lb in its class and conversely. Sentence (anchored at
/// position 1).
fn bijection(nu: bool, la: &str, lb: &str, f: &mut Fresh) -> Formula {
    let body = and(
        or(Formula::NegProp(la.to_string()), exactly_one(nu, lb, f)),
        or(Formula::NegProp(lb.to_string()), exactly_one(nu, la, f)),
    );
    always(nu, XG, body, f)
}

/// The big-witness formula: an infinite S-chain of la-positions, where
/// x S z iff x R x' < y' R⁻¹ y < z.
pub fn big_witness_formula(la: &str, lb: &str) -> Formula {
    let f = &mut Fresh(0);
    let w = "w".to_string();
    let back = in_class(
        true,
        and(
            Formula::Prop(la.to_string()),
            md(XG, even(true, XG, Formula::Var(w.clone()), f)),
        ),
        f,
    );
    let hop = in_class(
        true,
        and(
            Formula::Prop(lb.to_string()),
            md(XG, even(true, XG, and(Formula::Prop(lb.to_string()), back), f)),
        ),
        f,
    );
    let inner = Formula::Nu(w, Box::new(and(Formula::Prop(la.to_string()), hop)));
    even(true, XG, inner, f).alpha_normalize()
}

/// ν-only version of the big-witness formula's complement would need a
/// μ-detectable small witness, which is exactly what the big-witness trick
/// works around; the increasing-bijection sentence therefore lives in the
/// μ-fragment: the bijection check plus the dual of the ν-only big-witness
/// formula.
pub fn monotone_bijection_formula(la: &str, lb: &str) -> Formula {
    let f = &mut Fresh(0);
    let bij = bijection(false, la, lb, f);
    let no_big = big_witness_formula(la, lb).dualize().expect("closed formula");
    and(bij, no_big).alpha_normalize()
}

// ---------------------------------------------------------------------------
// PCP
// ---------------------------------------------------------------------------

/// A PCP instance: tiles (u_j, v_j) of nonempty words. The two marker
/// letters are chosen fresh, outside the instance's alphabet.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PcpInstance {
    pub pairs: Vec<(String, String)>,
}

impl PcpInstance {
    pub fn new(pairs: Vec<(String, String)>) -> Result<PcpInstance, ReductionError> {
        let inst = PcpInstance { pairs };
        inst.validate()?;
        Ok(inst)
    }

    /// Instance JSON: a list of [u, v] string pairs.
    pub fn from_json(text: &str) -> Result<PcpInstance, ReductionError> {
        let pairs: Vec<(String, String)> =
            serde_json::from_str(text).map_err(|e| ReductionError::BadJson(e.to_string()))?;
        PcpInstance::new(pairs)
    }

    fn validate(&self) -> Result<(), ReductionError> {
        for (u, v) in &self.pairs {
            if u.is_empty() || v.is_empty() {
                return Err(ReductionError::EmptyWord);
            }
        }
        let used = self.sigma();
        if ('a'..='z').filter(|c| !used.contains(c)).count() < 2 {
            return Err(ReductionError::NoMarkers);
        }
        Ok(())
    }

    /// The marker letters: the first two letters not used by the instance.
    pub fn markers(&self) -> (String, String) {
        let used = self.sigma();
        let mut free = ('a'..='z').filter(|c| !used.contains(c));
        (
            free.next().expect("validated").to_string(),
            free.next().expect("validated").to_string(),
        )
    }

    pub fn sigma(&self) -> BTreeSet<char> {
        self.pairs
            .iter()
            .flat_map(|(u, v)| u.chars().chain(v.chars()))
            .collect()
    }

    /// Letters of the encoding alphabet: Σ plus the two markers.
    pub fn alphabet(&self) -> Vec<String> {
        let mut out: Vec<String> = self.sigma().iter().map(|c| c.to_string()).collect();
        let (ma, mb) = self.markers();
        out.push(ma);
        out.push(mb);
        out
    }

    fn is_solution(&self, seq: &[usize]) -> Result<bool, ReductionError> {
        if seq.is_empty() {
            return Err(ReductionError::EmptySequence);
        }
        let mut u = String::new();
        let mut v = String::new();
        for &i in seq {
            let (ui, vi) =
                self.pairs.get(i.checked_sub(1).ok_or(ReductionError::BadIndex(i))?)
                    .ok_or(ReductionError::BadIndex(i))?;
            u.push_str(ui);
            v.push_str(vi);
        }
        Ok(u == v)
    }
}

/// One Xg step followed by skipping `skip`-labeled positions, then φ.
fn next_skipping(skip: &str, phi: Formula, f: &mut Fresh) -> Formula {
    let z = f.next();
    let body = or(
        and(Formula::Prop(skip.to_string()), md(XG, Formula::Var(z.clone()))),
        and(Formula::NegProp(skip.to_string()), phi),
    );
    md(XG, Formula::Mu(z, Box::new(body)))
}

/// The projection starting here, with `skip` removed, continues with the
/// letters of `word` and then `end`.
fn tile_chain(word: &str, end: &str, skip: &str, f: &mut Fresh) -> Formula {
    let mut phi = Formula::Prop(end.to_string());
    for c in word.chars().rev() {
        phi = and(Formula::Prop(c.to_string()), next_skipping(skip, phi, f));
    }
    next_skipping(skip, phi, f)
}

/// μ-fragment sentence satisfiable iff the instance has a solution;
/// satisfied by every encoding of a solution.
pub fn pcp_formula(inst: &PcpInstance) -> Result<Formula, ReductionError> {
    inst.validate()?;
    let (ma, mb) = inst.markers();
    let (ma, mb) = (ma.as_str(), mb.as_str());
    let f = &mut Fresh(0);
    let prop = |s: &str| Formula::Prop(s.to_string());
    // starts with the marker pair, has length ≥ 4, ends with the marker pair
    let starts = and(prop(ma), md(XG, prop(mb)));
    let len4 = md(XG, md(XG, md(XG, Formula::True)));
    let ends = even(
        false,
        XG,
        and(prop(ma), md(XG, and(prop(mb), Formula::Atom(Atom0::LastG)))),
        f,
    );
    let has_a = even(false, XG, prop(ma), f);
    let bij = monotone_bijection_formula(ma, mb);
    // every u-marker but the last carries some tile on both sides
    let mut tiles = Formula::False;
    for (u, v) in &inst.pairs {
        let k = tile_chain(u, ma, mb, f);
        let l = tile_chain(v, mb, ma, f);
        let at_mate = in_class(false, and(prop(mb), l), f);
        tiles = or(tiles, and(k, at_mate));
    }
    let no_later_a = wmd(XG, always(false, XG, Formula::NegProp(ma.into()), f));
    let cond3 = always(
        false,
        XG,
        or(Formula::NegProp(ma.into()), or(no_later_a, tiles)),
        f,
    );
    Ok(and(starts, and(len4, and(ends, and(has_a, and(bij, cond3)))))
        .alpha_normalize())
}

/// Data word encoding a solution: the common string with first markers at
/// the u-tile boundaries and second markers at the v-tile boundaries (first
/// before second where they coincide); the j-th markers of the two sorts
/// share a data value.
pub fn encode_solution(inst: &PcpInstance, seq: &[usize]) -> Result<DataWord, ReductionError> {
    inst.validate()?;
    let (ma, mb) = inst.markers();
    if !inst.is_solution(seq)? {
        return Err(ReductionError::NotASolution);
    }
    let mut s = String::new();
    let mut abounds = BTreeSet::from([0usize]);
    let mut bbounds = BTreeSet::from([0usize]);
    let mut ulen = 0;
    let mut vlen = 0;
    for &i in seq {
        let (u, v) = &inst.pairs[i - 1];
        s.push_str(u);
        ulen += u.chars().count();
        vlen += v.chars().count();
        abounds.insert(ulen);
        bbounds.insert(vlen);
    }
    let chars: Vec<char> = s.chars().collect();
    let mut parts = Vec::new();
    let mut marker_val = 0u64;
    let mut plain_val = 2 * (seq.len() as u64) + 10;
    for k in 0..=chars.len() {
        if abounds.contains(&k) {
            marker_val += 1;
            parts.push(format!("{ma}:{marker_val}"));
        }
        if bbounds.contains(&k) {
            let j =
                parts.iter().filter(|p| p.starts_with(&format!("{mb}:"))).count() as u64 + 1;
            parts.push(format!("{mb}:{j}"));
        }
        if k < chars.len() {
            plain_val += 1;
            parts.push(format!("{}:{plain_val}", chars[k]));
        }
    }
    Ok(DataWord::parse(&parts.join(" ")).expect("well-formed encoding"))
}

/// Search index sequences whose encodings fit in `max_len` positions and
/// return the first encoding of a solution found.
pub fn bounded_search(inst: &PcpInstance, max_len: usize) -> Option<DataWord> {
    let min_tile = inst
        .pairs
        .iter()
        .map(|(u, _)| u.chars().count())
        .min()
        .unwrap_or(1)
        .max(1);
    let k = inst.pairs.len();
    for t in 1..=max_len {
        // encoding length is |s| + 2(t+1) ≥ t·min_tile + 2(t+1)
        if t * min_tile + 2 * (t + 1) > max_len {
            break;
        }
        let mut seq = vec![1usize; t];
        'seqs: loop {
            if inst.is_solution(&seq).unwrap_or(false) {
                if let Ok(w) = encode_solution(inst, &seq) {
                    if w.len() <= max_len {
                        return Some(w);
                    }
                }
            }
            // next sequence in base-k counting
            let mut i = t;
            loop {
                if i == 0 {
                    break 'seqs;
                }
                i -= 1;
                if seq[i] < k {
                    seq[i] += 1;
                    for x in &mut seq[i + 1..] {
                        *x = 1;
                    }
                    continue 'seqs;
                }
                seq[i] = 1;
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataword::{alphabet, enumerate_up_to};
    use crate::evaluator::{eval_sentence, models};
    use crate::fragments::{is_mu_only, is_nu_only};

    fn w(s: &str) -> DataWord {
        DataWord::parse(s).unwrap()
    }

    /// The property the formula must define, checked directly.
    fn incr_bijection(u: &DataWord, la: &str, lb: &str) -> bool {
        let pos =
            |l: &str| (1..=u.len()).filter(|&i| u.letter(i) == l).collect::<Vec<_>>();
        let (aa, bb) = (pos(la), pos(lb));
        let mut pairs = Vec::new();
        for &x in &aa {
            let mates: Vec<usize> =
                bb.iter().copied().filter(|&y| u.value(y) == u.value(x)).collect();
            if mates.len() != 1 {
                return false;
            }
            pairs.push(mates[0]);
        }
        for &y in &bb {
            if aa.iter().filter(|&&x| u.value(x) == u.value(y)).count() != 1 {
                return false;
            }
        }
        // aa is sorted, so the images must be strictly increasing
        pairs.windows(2).all(|p| p[0] < p[1])
    }

    #[test]
    fn bijection_examples() {
        let phi = monotone_bijection_formula("a", "b");
        assert!(is_mu_only(&phi));
        assert!(is_nu_only(&big_witness_formula("a", "b")));
        assert!(models(&w("a:1 b:1"), &phi).unwrap());
        assert!(!models(&w("a:1 a:2 b:2 b:1"), &phi).unwrap());
        assert!(!models(&w("a:1 b:2"), &phi).unwrap());
    }

    #[test]
    fn bijection_brute_force() {
        let phi = monotone_bijection_formula("a", "b");
        for u in enumerate_up_to(&alphabet("abc"), 6) {
            if u.len() == 0 {
                continue;
            }
            let want = incr_bijection(&u, "a", "b");
            assert_eq!(models(&u, &phi).unwrap(), want, "{u:?}");
        }
    }

    #[test]
    fn big_witness_complement() {
        let big = big_witness_formula("a", "b");
        let dual = big.dualize().unwrap();
        for u in enumerate_up_to(&alphabet("abc"), 5) {
            let s = eval_sentence(&u, &big).unwrap();
            let d = eval_sentence(&u, &dual).unwrap();
            for i in 1..=u.len() {
                assert_ne!(s.contains(i), d.contains(i), "{u:?} at {i}");
            }
        }
    }

    fn inst() -> PcpInstance {
        PcpInstance::new(vec![("cd".into(), "c".into()), ("d".into(), "dd".into())])
            .unwrap()
    }

    #[test]
    fn pcp_encoding_satisfies_formula() {
        let i = inst();
        // solution 1·2: cd·d = c·dd
        let enc = encode_solution(&i, &[1, 2]).unwrap();
        assert_eq!(enc.letter(1), "a");
        assert_eq!(enc.letter(2), "b");
        assert_eq!(enc.letter(enc.len() - 1), "a");
        assert_eq!(enc.letter(enc.len()), "b");
        assert!(incr_bijection(&enc, "a", "b"));
        let phi = pcp_formula(&i).unwrap();
        assert!(is_mu_only(&phi));
        assert!(models(&enc, &phi).unwrap());
        // language invariance: permuting the data values preserves truth
        let permuted: Vec<String> = (1..=enc.len())
            .map(|p| format!("{}:{}", enc.letter(p), 97 - enc.value(p)))
            .collect();
        assert!(models(&w(&permuted.join(" ")), &phi).unwrap());
    }

    #[test]
    fn pcp_formula_rejects() {
        let phi = pcp_formula(&inst()).unwrap();
        assert!(!models(&w("c:1 a:2 b:2 a:3 b:3"), &phi).unwrap());
        assert!(!models(&w("a:1 b:1"), &phi).unwrap());
    }

    #[test]
    fn encode_errors() {
        let i = inst();
        assert_eq!(encode_solution(&i, &[]), Err(ReductionError::EmptySequence));
        assert_eq!(encode_solution(&i, &[1, 1]), Err(ReductionError::NotASolution));
        assert_eq!(encode_solution(&i, &[3]), Err(ReductionError::BadIndex(3)));
    }

    #[test]
    fn markers_avoid_instance_letters() {
        assert_eq!(inst().markers(), ("a".to_string(), "b".to_string()));
        // tiles over {a, b} push the markers to c, d
        let i = PcpInstance::new(vec![("ab".into(), "a".into()), ("b".into(), "bb".into())])
            .unwrap();
        assert_eq!(i.markers(), ("c".to_string(), "d".to_string()));
        let enc = encode_solution(&i, &[1, 2]).unwrap();
        assert_eq!(enc.letter(1), "c");
        assert_eq!(enc.letter(2), "d");
        assert!(incr_bijection(&enc, "c", "d"));
        let phi = pcp_formula(&i).unwrap();
        assert!(is_mu_only(&phi));
        assert!(models(&enc, &phi).unwrap());
        assert!(bounded_search(&i, 12).is_some());
    }

    #[test]
    fn bounded_search_finds_solution() {
        let i = inst();
        let found = bounded_search(&i, 12).expect("solution within 12 positions");
        let phi = pcp_formula(&i).unwrap();
        assert!(models(&found, &phi).unwrap());
        let hopeless = PcpInstance::new(vec![("c".into(), "d".into())]).unwrap();
        assert!(bounded_search(&hopeless, 12).is_none());
    }

    #[test]
    fn instance_json() {
        let i = PcpInstance::from_json(r#"[["cd","c"],["d","dd"]]"#).unwrap();
        assert_eq!(i, inst());
        assert!(PcpInstance::from_json("nope").is_err());
    }
}
