//! NAND formulas as hash-consed DAGs.
//!
//! Text format: one s-expression over named inputs, e.g.
//! `(nand a (nand b c))`. `#` starts a comment. Inputs are numbered in
//! order of first appearance, so `a` is x₁ above.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// Formulas with more inputs are not enumerated exhaustively.
pub const FORMULA_INPUT_CAP: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Operand {
    Input(usize),
    Node(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FormulaDag {
    inputs: Vec<String>,
    /// Each node is NAND of two operands that precede it.
    nodes: Vec<[Operand; 2]>,
    output: Operand,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Open,
    Close,
    Atom(String),
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>> {
    let mut tokens = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let code = line.split('#').next().unwrap_or("");
        let mut atom = String::new();
        let flush = |atom: &mut String, tokens: &mut Vec<(usize, Token)>| {
            if !atom.is_empty() {
                tokens.push((line_no, Token::Atom(std::mem::take(atom))));
            }
        };
        for c in code.chars() {
            match c {
                '(' | ')' => {
                    flush(&mut atom, &mut tokens);
                    tokens.push((line_no, if c == '(' { Token::Open } else { Token::Close }));
                }
                c if c.is_whitespace() => flush(&mut atom, &mut tokens),
                c if c.is_alphanumeric() || c == '_' || c == '-' || c == '.' => atom.push(c),
                other => return Err(Error::parse(line_no, format!("unexpected character `{other}`"))),
            }
        }
        flush(&mut atom, &mut tokens);
    }
    Ok(tokens)
}

struct Builder {
    inputs: Vec<String>,
    input_index: HashMap<String, usize>,
    nodes: Vec<[Operand; 2]>,
    node_index: HashMap<[Operand; 2], usize>,
}

impl Builder {
    fn new() -> Self {
        Self {
            inputs: Vec::new(),
            input_index: HashMap::new(),
            nodes: Vec::new(),
            node_index: HashMap::new(),
        }
    }

    fn input(&mut self, name: &str) -> Operand {
        if let Some(&i) = self.input_index.get(name) {
            return Operand::Input(i);
        }
        let i = self.inputs.len();
        self.inputs.push(name.to_string());
        self.input_index.insert(name.to_string(), i);
        Operand::Input(i)
    }

    fn nand(&mut self, a: Operand, b: Operand) -> Operand {
        let key = [a, b];
        if let Some(&n) = self.node_index.get(&key) {
            return Operand::Node(n);
        }
        let n = self.nodes.len();
        self.nodes.push(key);
        self.node_index.insert(key, n);
        Operand::Node(n)
    }

    fn finish(self, output: Operand) -> Result<FormulaDag> {
        if self.inputs.len() > FORMULA_INPUT_CAP {
            return Err(Error::ArityLimit {
                arity: self.inputs.len(),
                limit: FORMULA_INPUT_CAP,
            });
        }
        Ok(FormulaDag {
            inputs: self.inputs,
            nodes: self.nodes,
            output,
        })
    }
}

impl FormulaDag {
    pub fn parse(text: &str) -> Result<Self> {
        let tokens = tokenize(text)?;
        let mut b = Builder::new();
        let mut pos = 0;
        let output = parse_expr(&tokens, &mut pos, &mut b)?;
        if let Some((line, _)) = tokens.get(pos) {
            return Err(Error::parse(*line, "trailing input after the formula"));
        }
        b.finish(output)
    }

    /// Complete NAND tree of the given depth over inputs `x1 … x_{2^depth}`.
    pub fn balanced_tree(depth: u32) -> Result<Self> {
        let mut b = Builder::new();
        let mut layer: Vec<Operand> = (1..=1usize << depth).map(|i| b.input(&format!("x{i}"))).collect();
        while layer.len() > 1 {
            layer = layer.chunks(2).map(|pair| b.nand(pair[0], pair[1])).collect();
        }
        b.finish(layer[0])
    }

    /// Left-deep chain `NAND(…NAND(NAND(x1,x2),x3)…,xn)`.
    pub fn chain(inputs: usize) -> Result<Self> {
        if inputs < 2 {
            return Err(Error::InvalidParameter("a chain needs at least two inputs".into()));
        }
        let mut b = Builder::new();
        let first = b.input("x1");
        let mut acc = first;
        for i in 2..=inputs {
            let x = b.input(&format!("x{i}"));
            acc = b.nand(acc, x);
        }
        b.finish(acc)
    }

    pub fn arity(&self) -> usize {
        self.inputs.len()
    }

    pub fn input_names(&self) -> &[String] {
        &self.inputs
    }

    pub fn nodes(&self) -> &[[Operand; 2]] {
        &self.nodes
    }

    pub fn output(&self) -> Operand {
        self.output
    }

    /// Value of every node for input index `x` (x₁ = bit 0).
    pub fn node_values(&self, x: u64) -> Vec<bool> {
        let mut values = Vec::with_capacity(self.nodes.len());
        for [a, b] in &self.nodes {
            let get = |o: &Operand, values: &[bool]| match *o {
                Operand::Input(i) => (x >> i) & 1 == 1,
                Operand::Node(n) => values[n],
            };
            let v = !(get(a, &values) && get(b, &values));
            values.push(v);
        }
        values
    }

    pub fn evaluate(&self, x: u64) -> bool {
        match self.output {
            Operand::Input(i) => (x >> i) & 1 == 1,
            Operand::Node(n) => self.node_values(x)[n],
        }
    }

    /// Number of NAND operand slots that read each operand.
    pub fn consumers(&self, operand: Operand) -> usize {
        self.nodes.iter().flatten().filter(|&&o| o == operand).count()
    }

    fn write(&self, o: Operand, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match o {
            Operand::Input(i) => write!(f, "{}", self.inputs[i]),
            Operand::Node(n) => {
                let [a, b] = self.nodes[n];
                write!(f, "(nand ")?;
                self.write(a, f)?;
                write!(f, " ")?;
                self.write(b, f)?;
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for FormulaDag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.output, f)
    }
}

fn parse_expr(tokens: &[(usize, Token)], pos: &mut usize, b: &mut Builder) -> Result<Operand> {
    let last_line = tokens.last().map_or(1, |t| t.0);
    let Some((line, tok)) = tokens.get(*pos) else {
        return Err(Error::parse(last_line, "unexpected end of formula"));
    };
    let line = *line;
    *pos += 1;
    match tok {
        Token::Atom(name) => {
            if name.eq_ignore_ascii_case("nand") {
                return Err(Error::parse(line, "`nand` must follow an opening parenthesis"));
            }
            Ok(b.input(name))
        }
        Token::Close => Err(Error::parse(line, "unexpected `)`")),
        Token::Open => {
            match tokens.get(*pos) {
                Some((_, Token::Atom(op))) if op.eq_ignore_ascii_case("nand") => *pos += 1,
                Some((l, Token::Atom(op))) => {
                    return Err(Error::parse(
                        *l,
                        format!("unknown operator `{op}`; only `nand` is supported"),
                    ))
                }
                Some((l, _)) => return Err(Error::parse(*l, "expected an operator after `(`")),
                None => return Err(Error::parse(line, "unexpected end of formula")),
            }
            let a = parse_expr(tokens, pos, b)?;
            let c = parse_expr(tokens, pos, b)?;
            match tokens.get(*pos) {
                Some((_, Token::Close)) => {
                    *pos += 1;
                    Ok(b.nand(a, c))
                }
                Some((l, _)) => Err(Error::parse(*l, "`nand` takes exactly two operands")),
                None => Err(Error::parse(last_line, "missing `)`")),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_evaluates() {
        let f = FormulaDag::parse("# comment\n(nand a\n  (nand b c))  # trailing\n").unwrap();
        assert_eq!(f.input_names(), ["a", "b", "c"]);
        assert_eq!(f.nodes().len(), 2);
        for x in 0..8u64 {
            let (a, b, c) = (x & 1 == 1, x & 2 == 2, x & 4 == 4);
            assert_eq!(f.evaluate(x), !(a && !(b && c)));
        }
        assert_eq!(f.to_string(), "(nand a (nand b c))");
    }

    #[test]
    fn shared_subexpressions_are_merged() {
        let f = FormulaDag::parse("(nand (nand a b) (nand a b))").unwrap();
        assert_eq!(f.nodes().len(), 2);
        assert_eq!(f.consumers(Operand::Node(0)), 2);
        assert_eq!(f.consumers(Operand::Input(0)), 1);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("(nand a b", 1),
            ("(nand a\nb c)", 2),
            ("(and a b)", 1),
            ("(nand a b)\n\n(nand c d)", 3),
            ("\n)", 2),
            ("(nand a $)", 1),
            ("", 1),
        ];
        for (text, line) in cases {
            match FormulaDag::parse(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?} gave {other:?}"),
            }
        }
    }

    #[test]
    fn balanced_tree_and_chain() {
        let t = FormulaDag::balanced_tree(3).unwrap();
        assert_eq!(t.arity(), 8);
        assert_eq!(t.nodes().len(), 7);
        assert_eq!(
            t.to_string(),
            "(nand (nand (nand x1 x2) (nand x3 x4)) (nand (nand x5 x6) (nand x7 x8)))"
        );
        let round = FormulaDag::parse(&t.to_string()).unwrap();
        assert_eq!(round.to_string(), t.to_string());
        assert!((0..256).all(|x| round.evaluate(x) == t.evaluate(x)));
        let c = FormulaDag::chain(4).unwrap();
        assert_eq!(c.to_string(), "(nand (nand (nand x1 x2) x3) x4)");
        let single = FormulaDag::parse("x").unwrap();
        assert!(single.evaluate(1) && !single.evaluate(0));
    }
}
