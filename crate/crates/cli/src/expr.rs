//! Tiny arithmetic expression language for inline data in config files.
//!
//! Grammar: `+ - * / ^` with the usual precedence (`^` binds tightest,
//! right-associative), parentheses, unary minus, numeric literals, the
//! coordinates `x`, `y` (and `r` as an alias for the first coordinate on
//! radial grids), the constant `pi`, and the functions `abs`, `sqrt`,
//! `exp`, `min`, `max`, `chi`.
//!
//! `chi(a, b)` is 1 when both arguments are nonnegative and 0 otherwise,
//! so `chi(x-l, u-x)` is the indicator of `l <= x <= u` and products of
//! `chi` factors build boxes.

#[derive(Clone, Copy, Debug, PartialEq)]
enum Func {
    Abs,
    Sqrt,
    Exp,
    Min,
    Max,
    Chi,
}

impl Func {
    fn arity(self) -> usize {
        match self {
            Func::Abs | Func::Sqrt | Func::Exp => 1,
            Func::Min | Func::Max | Func::Chi => 2,
        }
    }

    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "min" => Func::Min,
            "max" => Func::Max,
            "chi" => Func::Chi,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug)]
enum Node {
    Num(f64),
    Coord(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

impl Node {
    fn eval(&self, c: &[f64]) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::Coord(i) => c[*i],
            Node::Neg(a) => -a.eval(c),
            Node::Add(a, b) => a.eval(c) + b.eval(c),
            Node::Sub(a, b) => a.eval(c) - b.eval(c),
            Node::Mul(a, b) => a.eval(c) * b.eval(c),
            Node::Div(a, b) => a.eval(c) / b.eval(c),
            Node::Pow(a, b) => a.eval(c).powf(b.eval(c)),
            Node::Call(f, args) => {
                let a = args[0].eval(c);
                match f {
                    Func::Abs => a.abs(),
                    Func::Sqrt => a.sqrt(),
                    Func::Exp => a.exp(),
                    Func::Min => a.min(args[1].eval(c)),
                    Func::Max => a.max(args[1].eval(c)),
                    Func::Chi => {
                        if a >= 0.0 && args[1].eval(c) >= 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    }
                }
            }
        }
    }

    fn max_axis(&self) -> Option<usize> {
        match self {
            Node::Num(_) => None,
            Node::Coord(i) => Some(*i),
            Node::Neg(a) => a.max_axis(),
            Node::Add(a, b)
            | Node::Sub(a, b)
            | Node::Mul(a, b)
            | Node::Div(a, b)
            | Node::Pow(a, b) => a.max_axis().max(b.max_axis()),
            Node::Call(_, args) => args.iter().filter_map(|a| a.max_axis()).max(),
        }
    }
}

/// A parsed expression, ready to evaluate at grid coordinates.
#[derive(Clone, Debug)]
pub struct Compiled {
    root: Node,
    /// Highest coordinate axis the expression reads, if any.
    pub max_axis: Option<usize>,
}

impl Compiled {
    pub fn eval(&self, c: &[f64]) -> f64 {
        self.root.eval(c)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<Tok>, String> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                toks.push(Tok::Plus);
                i += 1;
            }
            '-' => {
                toks.push(Tok::Minus);
                i += 1;
            }
            '*' => {
                toks.push(Tok::Star);
                i += 1;
            }
            '/' => {
                toks.push(Tok::Slash);
                i += 1;
            }
            '^' => {
                toks.push(Tok::Caret);
                i += 1;
            }
            '(' => {
                toks.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                toks.push(Tok::RParen);
                i += 1;
            }
            ',' => {
                toks.push(Tok::Comma);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i] as char, '0'..='9' | '.') {
                    i += 1;
                }
                // scientific notation, with optional sign on the exponent
                if i < bytes.len() && matches!(bytes[i] as char, 'e' | 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && matches!(bytes[j] as char, '+' | '-') {
                        j += 1;
                    }
                    if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let v: f64 = text
                    .parse()
                    .map_err(|_| format!("bad number '{text}' at byte {start}"))?;
                toks.push(Tok::Num(v));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && matches!(bytes[i] as char, 'a'..='z' | 'A'..='Z' | '0'..='9' | '_')
                {
                    i += 1;
                }
                toks.push(Tok::Ident(src[start..i].to_string()));
            }
            other => return Err(format!("unexpected character '{other}' at byte {i}")),
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), String> {
        match self.next() {
            Some(got) if got == t => Ok(()),
            Some(got) => Err(format!("expected {what}, found {got:?}")),
            None => Err(format!("expected {what}, found end of expression")),
        }
    }

    fn expr(&mut self) -> Result<Node, String> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.next();
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.next();
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node, String> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.next();
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Tok::Slash) => {
                    self.next();
                    lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Node, String> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.next();
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, String> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.next();
            // right-associative, and the exponent may carry its own sign
            let exp = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, String> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(Node::Num(v)),
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                if matches!(self.peek(), Some(Tok::LParen)) {
                    let f = Func::lookup(&name)
                        .ok_or_else(|| format!("unknown function '{name}'"))?;
                    self.next();
                    let mut args = vec![self.expr()?];
                    while matches!(self.peek(), Some(Tok::Comma)) {
                        self.next();
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen, "')'")?;
                    if args.len() != f.arity() {
                        return Err(format!(
                            "{name} takes {} argument(s), got {}",
                            f.arity(),
                            args.len()
                        ));
                    }
                    return Ok(Node::Call(f, args));
                }
                match name.as_str() {
                    "x" | "r" => Ok(Node::Coord(0)),
                    "y" => Ok(Node::Coord(1)),
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    _ => Err(format!("unknown name '{name}'")),
                }
            }
            Some(t) => Err(format!("unexpected token {t:?}")),
            None => Err("unexpected end of expression".into()),
        }
    }
}

pub fn parse(src: &str) -> Result<Compiled, String> {
    let toks = tokenize(src)?;
    if toks.is_empty() {
        return Err("empty expression".into());
    }
    let mut p = Parser { toks, pos: 0 };
    let root = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(format!("trailing input after expression: {:?}", p.toks[p.pos]));
    }
    let max_axis = root.max_axis();
    Ok(Compiled { root, max_axis })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, c: &[f64]) -> f64 {
        parse(src).unwrap().eval(c)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1+2*3", &[]), 7.0);
        assert_eq!(ev("(1+2)*3", &[]), 9.0);
        assert_eq!(ev("2^3^2", &[]), 512.0);
        assert_eq!(ev("-2^2", &[]), -4.0);
        assert_eq!(ev("2^-1", &[]), 0.5);
        assert_eq!(ev("6/3/2", &[]), 1.0);
        assert_eq!(ev("1-2-3", &[]), -4.0);
    }

    #[test]
    fn coordinates_functions_and_chi() {
        assert_eq!(ev("x^2+y", &[3.0, 4.0]), 13.0);
        assert_eq!(ev("r", &[0.25]), 0.25);
        assert_eq!(ev("max(x, 0.5) - min(x, 0.5)", &[0.2]), 0.3);
        assert_eq!(ev("abs(-3)*sqrt(4)", &[]), 6.0);
        assert!((ev("exp(1)", &[]) - std::f64::consts::E).abs() < 1e-15);
        let box_2d = "5*chi(x-0.25,0.75-x)*chi(y-0.25,0.75-y)";
        assert_eq!(ev(box_2d, &[0.5, 0.5]), 5.0);
        assert_eq!(ev(box_2d, &[0.5, 0.9]), 0.0);
        assert_eq!(ev("chi(x-0.25,0.75-x)", &[0.25]), 1.0);
        assert_eq!(ev("1.5e-1*2", &[]), 0.3);
    }

    #[test]
    fn reports_axis_use() {
        assert_eq!(parse("3.0").unwrap().max_axis, None);
        assert_eq!(parse("x*2").unwrap().max_axis, Some(0));
        assert_eq!(parse("x+y").unwrap().max_axis, Some(1));
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(parse("").is_err());
        assert!(parse("1+").is_err());
        assert!(parse("foo(1)").is_err());
        assert!(parse("min(1)").is_err());
        assert!(parse("(1+2").is_err());
        assert!(parse("1 2").is_err());
        assert!(parse("1@2").is_err());
        assert!(parse("z").is_err());
    }
}
