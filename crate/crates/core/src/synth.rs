//! Seeded generator of subset-language source files.
//!
//! Function bodies alternate runs of structural statements (calls, branches,
//! loops, assignments, returns) with runs of filler that carries no
//! structural node: comments, bare arithmetic expression statements and
//! docstrings. Calls to `planted_api_<n>` act as anchors a query can refer to.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lexer::SourceFile;

const VARS: &[&str] = &[
    "buf", "count", "total", "item", "node", "value", "limit", "offset", "result", "state", "key", "index",
];
const FUNCS: &[&str] = &["parse", "emit", "lookup", "flush", "check", "render", "encode", "update"];
const WORDS: &[&str] = &[
    "note", "keep", "this", "path", "cheap", "when", "the", "cache", "is", "warm", "otherwise", "slow",
];

/// Number of distinct planted anchor names.
pub const PLANTED: usize = 8;

pub fn planted_name(n: usize) -> String {
    format!("planted_api_{n}")
}

struct Gen {
    rng: ChaCha8Rng,
    out: String,
}

impl Gen {
    fn pick<'a>(&mut self, xs: &'a [&'a str]) -> &'a str {
        xs.choose(&mut self.rng).expect("non-empty")
    }

    fn line(&mut self, depth: usize, text: &str) {
        for _ in 0..depth {
            self.out.push_str("    ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn arith(&mut self) -> String {
        let n = self.rng.gen_range(2..6);
        let mut e = self.pick(VARS).to_owned();
        for _ in 0..n {
            let op = *["+", "-", "*"].choose(&mut self.rng).expect("non-empty");
            if self.rng.gen_bool(0.5) {
                e = format!("{e} {op} {}", self.rng.gen_range(1..100));
            } else {
                e = format!("{e} {op} {}", self.pick(VARS));
            }
        }
        e
    }

    fn call(&mut self) -> String {
        let name = if self.rng.gen_bool(0.3) {
            planted_name(self.rng.gen_range(0..PLANTED))
        } else {
            self.pick(FUNCS).to_owned()
        };
        let args: Vec<&str> = (0..self.rng.gen_range(0..3)).map(|_| self.pick(VARS)).collect();
        format!("{name}({})", args.join(", "))
    }

    fn filler(&mut self, depth: usize) {
        match self.rng.gen_range(0..3) {
            0 => {
                let n = self.rng.gen_range(3..9);
                let words: Vec<&str> = (0..n).map(|_| self.pick(WORDS)).collect();
                self.line(depth, &format!("# {}", words.join(" ")));
            }
            1 => {
                let e = self.arith();
                self.line(depth, &e);
            }
            _ => {
                let e = format!("({}) * ({})", self.arith(), self.arith());
                self.line(depth, &e);
            }
        }
    }

    fn statement(&mut self, depth: usize, budget: &mut usize) {
        *budget = budget.saturating_sub(1);
        match self.rng.gen_range(0..6) {
            0 => {
                let c = self.call();
                self.line(depth, &c);
            }
            1 | 2 => {
                let target = self.pick(VARS);
                let value = if self.rng.gen_bool(0.5) { self.call() } else { self.arith() };
                self.line(depth, &format!("{target} = {value}"));
            }
            3 if depth < 3 && *budget > 2 => {
                let cond = self.arith();
                self.line(depth, &format!("if {cond} > 0:"));
                self.block(depth + 1, budget);
                if self.rng.gen_bool(0.4) {
                    self.line(depth, "else:");
                    self.block(depth + 1, budget);
                }
            }
            4 if depth < 3 && *budget > 2 => {
                let v = self.pick(VARS);
                let it = self.pick(VARS);
                self.line(depth, &format!("for {v} in range({it}):"));
                self.block(depth + 1, budget);
            }
            _ => {
                let target = self.pick(VARS);
                let e = self.arith();
                self.line(depth, &format!("{target} += {e}"));
            }
        }
    }

    fn block(&mut self, depth: usize, budget: &mut usize) {
        // a comment alone would leave the block empty
        let target = self.pick(VARS);
        let value = self.arith();
        self.line(depth, &format!("{target} = {value}"));
        let n = self.rng.gen_range(0..3);
        for _ in 0..n {
            self.statement(depth, budget);
        }
    }

    fn function(&mut self, name: &str) {
        let params: Vec<&str> = (0..self.rng.gen_range(1..4)).map(|_| self.pick(VARS)).collect();
        let mut params = params;
        params.dedup();
        self.line(0, &format!("def {name}({}):", params.join(", ")));
        if self.rng.gen_bool(0.5) {
            let words: Vec<&str> = (0..self.rng.gen_range(4..12)).map(|_| self.pick(WORDS)).collect();
            self.line(1, &format!("\"\"\"{}.\"\"\"", words.join(" ")));
        }
        let mut budget = self.rng.gen_range(4..14);
        while budget > 0 {
            if self.rng.gen_bool(0.4) {
                for _ in 0..self.rng.gen_range(2..6) {
                    self.filler(1);
                }
            }
            for _ in 0..self.rng.gen_range(3..7) {
                self.statement(1, &mut budget);
            }
        }
        let r = self.pick(VARS);
        self.line(1, &format!("return {r}"));
        self.out.push('\n');
    }
}

/// One file with `functions` generated functions.
pub fn file(seed: u64, index: usize, functions: usize) -> SourceFile {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed ^ (index as u64).rotate_left(24)),
        out: String::new(),
    };
    for f in 0..functions {
        g.function(&format!("fn_{index}_{f}"));
    }
    SourceFile::new(format!("mod_{index:03}.py"), g.out)
}

/// `files` files of 2 to 6 functions each.
pub fn corpus(seed: u64, files: usize) -> Vec<SourceFile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..files)
        .map(|i| file(seed, i, rng.gen_range(2..7)))
        .collect()
}

/// A natural-language query naming one or two planted anchors.
pub fn query(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9));
    let a = rng.gen_range(0..PLANTED);
    let b = (a + rng.gen_range(1..PLANTED)) % PLANTED;
    format!("why does {} return stale data after {}", planted_name(a), planted_name(b))
}
