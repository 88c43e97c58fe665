//! Parenthesized prefix text form, e.g. `(+ (* 2.5 x0) (sin x1))`.

use super::{ExpressionTree, Symbol};
use crate::error::{Error, Result};

pub(super) fn to_prefix(tree: &ExpressionTree) -> String {
    let nodes = tree.nodes();
    let mut out = String::new();
    // children still to print for each open operator
    let mut open: Vec<usize> = Vec::new();
    for s in nodes {
        if !out.is_empty() && !out.ends_with('(') {
            out.push(' ');
        }
        match s.op_name() {
            Some(name) => {
                out.push('(');
                out.push_str(name);
                open.push(s.arity());
                continue;
            }
            None => match s {
                Symbol::Var(v) => out.push_str(&format!("x{v}")),
                Symbol::Const(c) => out.push_str(&format!("{c:?}")),
                _ => unreachable!(),
            },
        }
        while let Some(top) = open.last_mut() {
            *top -= 1;
            if *top > 0 {
                break;
            }
            out.push(')');
            open.pop();
        }
    }
    out
}

fn tokenize(s: &str) -> Vec<&str> {
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' | ')' => {
                if let Some(st) = start.take() {
                    tokens.push(&s[st..i]);
                }
                tokens.push(&s[i..i + 1]);
            }
            c if c.is_whitespace() => {
                if let Some(st) = start.take() {
                    tokens.push(&s[st..i]);
                }
            }
            _ => {
                if start.is_none() {
                    start = Some(i);
                }
            }
        }
    }
    if let Some(st) = start {
        tokens.push(&s[st..]);
    }
    tokens
}

fn operator(name: &str) -> Option<Symbol> {
    Some(match name {
        "+" => Symbol::Add,
        "-" => Symbol::Sub,
        "*" => Symbol::Mul,
        "/" => Symbol::Div,
        "sin" => Symbol::Sin,
        "cos" => Symbol::Cos,
        "tan" => Symbol::Tan,
        "exp" => Symbol::Exp,
        "log" => Symbol::Log,
        _ => return None,
    })
}

fn terminal(tok: &str) -> Result<Symbol> {
    if let Some(idx) = tok.strip_prefix('x') {
        return idx
            .parse::<u32>()
            .map(Symbol::Var)
            .map_err(|_| Error::Parse(format!("bad variable `{tok}`")));
    }
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Symbol::Const(v)),
        _ => Err(Error::Parse(format!("unexpected token `{tok}`"))),
    }
}

pub(super) fn parse_prefix(s: &str) -> Result<ExpressionTree> {
    let tokens = tokenize(s);
    let mut nodes = Vec::new();
    let mut pos = 0;
    parse_node(&tokens, &mut pos, &mut nodes)?;
    if pos != tokens.len() {
        return Err(Error::Parse(format!("trailing input at token {pos}")));
    }
    ExpressionTree::from_prefix(nodes)
}

fn parse_node(tokens: &[&str], pos: &mut usize, out: &mut Vec<Symbol>) -> Result<()> {
    let tok = *tokens
        .get(*pos)
        .ok_or_else(|| Error::Parse("unexpected end of input".into()))?;
    *pos += 1;
    if tok != "(" {
        if tok == ")" {
            return Err(Error::Parse("unexpected `)`".into()));
        }
        out.push(terminal(tok)?);
        return Ok(());
    }
    let name = *tokens
        .get(*pos)
        .ok_or_else(|| Error::Parse("unexpected end of input".into()))?;
    *pos += 1;
    let op = operator(name).ok_or_else(|| Error::Parse(format!("unknown operator `{name}`")))?;
    out.push(op);
    for _ in 0..op.arity() {
        parse_node(tokens, pos, out)?;
    }
    match tokens.get(*pos) {
        Some(&")") => {
            *pos += 1;
            Ok(())
        }
        _ => Err(Error::Parse(format!("`{name}` expects {} operand(s)", op.arity()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_example() {
        let t: ExpressionTree = "(+ (* 2.5 x0) (sin x1))".parse().unwrap();
        assert_eq!(
            t.nodes(),
            &[
                Symbol::Add,
                Symbol::Mul,
                Symbol::Const(2.5),
                Symbol::Var(0),
                Symbol::Sin,
                Symbol::Var(1)
            ]
        );
        assert_eq!(t.to_string(), "(+ (* 2.5 x0) (sin x1))");
    }

    #[test]
    fn negative_constants_and_errors() {
        let t: ExpressionTree = "(- -3.5 (/ x0 1e-7))".parse().unwrap();
        assert_eq!(t.constants(), vec![-3.5, 1e-7]);
        assert_eq!(t.to_string().parse::<ExpressionTree>().unwrap(), t);
        for bad in ["(+ x0)", "(+ x0 x1 x2)", "(foo x0)", "x", ")", "(sin x0", "nan"] {
            assert!(bad.parse::<ExpressionTree>().is_err(), "{bad}");
        }
    }
}
