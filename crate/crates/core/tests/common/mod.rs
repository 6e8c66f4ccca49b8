#![allow(dead_code)]

use std::collections::HashMap;

use lmx_core::lmx::{linearize, vocabulary, TokenSequence};
use lmx_core::treedist::{CostModel, Node};
use rand::seq::SliceRandom;
use rand::Rng;

/// Label-dependent integer costs so oracle checks exercise more than unit costs.
pub struct Skewed;

impl CostModel<u8> for Skewed {
    type Cost = u32;
    fn delete(&self, a: &u8) -> u32 {
        1 + u32::from(a % 2)
    }
    fn insert(&self, _: &u8) -> u32 {
        2
    }
    fn relabel(&self, a: &u8, b: &u8) -> u32 {
        u32::from(a.abs_diff(*b))
    }
}

pub struct Unit;

impl CostModel<u8> for Unit {
    type Cost = u32;
    fn delete(&self, _: &u8) -> u32 {
        1
    }
    fn insert(&self, _: &u8) -> u32 {
        1
    }
    fn relabel(&self, a: &u8, b: &u8) -> u32 {
        u32::from(a != b)
    }
}

/// Random ordered tree: each new node becomes a child of a random existing node.
pub fn random_tree(rng: &mut impl Rng, nodes: usize, alphabet: u8) -> Node<u8> {
    let mut labels = vec![rng.gen_range(0..alphabet)];
    let mut kids: Vec<Vec<usize>> = vec![Vec::new()];
    for i in 1..nodes {
        let p = rng.gen_range(0..i);
        let at = rng.gen_range(0..=kids[p].len());
        kids[p].insert(at, i);
        kids.push(Vec::new());
        labels.push(rng.gen_range(0..alphabet));
    }
    fn build(i: usize, labels: &[u8], kids: &[Vec<usize>]) -> Node<u8> {
        Node::new(labels[i], kids[i].iter().map(|k| build(*k, labels, kids)).collect())
    }
    build(0, &labels, &kids)
}

/// Textbook forest recursion on the rightmost roots, memoized by forest identity.
pub fn ted_oracle<C: CostModel<u8, Cost = u32>>(a: &Node<u8>, b: &Node<u8>, costs: &C) -> u32 {
    type Forest<'a> = Vec<&'a Node<u8>>;
    fn key(f: &Forest) -> Vec<usize> {
        f.iter().map(|n| *n as *const Node<u8> as usize).collect()
    }
    fn all_cost<C: CostModel<u8, Cost = u32>>(f: &Forest, c: &C, del: bool) -> u32 {
        f.iter()
            .map(|n| {
                let own = if del { c.delete(&n.label) } else { c.insert(&n.label) };
                own + all_cost(&n.children.iter().collect(), c, del)
            })
            .sum()
    }
    fn go<'a, C: CostModel<u8, Cost = u32>>(
        f: Forest<'a>,
        g: Forest<'a>,
        c: &C,
        memo: &mut HashMap<(Vec<usize>, Vec<usize>), u32>,
    ) -> u32 {
        if f.is_empty() {
            return all_cost(&g, c, false);
        }
        if g.is_empty() {
            return all_cost(&f, c, true);
        }
        let k = (key(&f), key(&g));
        if let Some(v) = memo.get(&k) {
            return *v;
        }
        let (v, w) = (*f.last().unwrap(), *g.last().unwrap());
        let f_rest: Forest = f[..f.len() - 1].to_vec();
        let g_rest: Forest = g[..g.len() - 1].to_vec();
        let mut f_open = f_rest.clone();
        f_open.extend(v.children.iter());
        let mut g_open = g_rest.clone();
        g_open.extend(w.children.iter());
        let del = go(f_open, g.clone(), c, memo) + c.delete(&v.label);
        let ins = go(f.clone(), g_open, c, memo) + c.insert(&w.label);
        let sub = go(f_rest, g_rest, c, memo)
            + go(v.children.iter().collect(), w.children.iter().collect(), c, memo)
            + c.relabel(&v.label, &w.label);
        let best = del.min(ins).min(sub);
        memo.insert(k, best);
        best
    }
    go(vec![a], vec![b], costs, &mut HashMap::new())
}

/// Enumerate every alignment (match/substitute, delete, insert) with
/// branch-and-bound pruning; no table is kept.
pub fn brute_edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    fn go<T: PartialEq>(a: &[T], b: &[T], spent: usize, best: &mut usize) {
        // Any completion costs at least the length difference.
        if spent + a.len().abs_diff(b.len()) >= *best {
            return;
        }
        match (a.split_first(), b.split_first()) {
            (None, None) => *best = spent,
            (Some((_, ar)), None) => go(ar, b, spent + 1, best),
            (None, Some((_, br))) => go(a, br, spent + 1, best),
            (Some((x, ar)), Some((y, br))) => {
                go(ar, br, spent + usize::from(x != y), best);
                go(ar, b, spent + 1, best);
                go(a, br, spent + 1, best);
            }
        }
    }
    let mut best = a.len() + b.len() + 1;
    go(a, b, 0, &mut best);
    best
}

/// Full-matrix Levenshtein over chars.
pub fn char_dp(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let s = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = s.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

pub fn synth_tokens(seed: u64) -> TokenSequence {
    let doc = lmx_core::synth::generate(seed);
    let (c, _) = lmx_core::canonical::canonicalize(&doc).expect("generated scores canonicalize");
    let scoped = lmx_core::lmx::lmx_scope(&c).expect("scope");
    linearize(&scoped).expect("generated scores linearize")
}

const NOISE: &[&str] = &["", "measure:", "voice:0", "voice:99", "C", "Z4", "time:4/", "key:fifths:x", "3in", "🎹", "<note>", "staff:3"];

/// Apply random insertions, deletions and substitutions from the vocabulary plus raw noise.
pub fn corrupt(seq: &TokenSequence, rng: &mut impl Rng, edits: usize) -> TokenSequence {
    let vocab: Vec<&str> = vocabulary().tokens().collect();
    let mut t = seq.tokens.clone();
    let pick = |rng: &mut dyn rand::RngCore| -> String {
        if rng.gen_bool(0.15) {
            NOISE.choose(rng).unwrap().to_string()
        } else {
            vocab.choose(rng).unwrap().to_string()
        }
    };
    for _ in 0..edits {
        match rng.gen_range(0..3) {
            0 => {
                let at = rng.gen_range(0..=t.len());
                t.insert(at, pick(rng));
            }
            1 if !t.is_empty() => {
                let at = rng.gen_range(0..t.len());
                t.remove(at);
            }
            _ if !t.is_empty() => {
                let at = rng.gen_range(0..t.len());
                t[at] = pick(rng);
            }
            _ => t.push(pick(rng)),
        }
    }
    TokenSequence::new(t)
}
