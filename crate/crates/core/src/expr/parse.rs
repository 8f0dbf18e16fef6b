use super::{Expr, ExprError, Func};
use crate::jets::{MultiIndex, MultiIndexSet};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number(String),
    Ident(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ExprError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_digit()
            || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            Tok::Number(chars[start..i].iter().collect())
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else {
            i += 1;
            match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                ',' => Tok::Comma,
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '*' => Tok::Star,
                '/' => Tok::Slash,
                '^' => Tok::Caret,
                other => {
                    return Err(ExprError::Syntax {
                        line: l0,
                        col: c0,
                        msg: format!("unexpected character {other:?}"),
                    })
                }
            }
        };
        col += i - start;
        out.push(Token {
            tok,
            line: l0,
            col: c0,
        });
    }
    out.push(Token {
        tok: Tok::End,
        line,
        col,
    });
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    set: &'a MultiIndexSet,
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if t.tok != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn syntax(&self, t: &Token, msg: impl Into<String>) -> ExprError {
        ExprError::Syntax {
            line: t.line,
            col: t.col,
            msg: msg.into(),
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token, ExprError> {
        let t = self.next();
        if t.tok == want {
            Ok(t)
        } else {
            Err(self.syntax(&t, format!("expected {what}, found {}", describe(&t.tok))))
        }
    }

    fn index(&mut self) -> Result<(u32, Token), ExprError> {
        let t = self.next();
        match &t.tok {
            Tok::Number(s) if s.chars().all(|c| c.is_ascii_digit()) => {
                let v = s.parse().map_err(|_| self.syntax(&t, "index too large"))?;
                Ok((v, t))
            }
            _ => Err(self.syntax(
                &t,
                format!("expected an integer index, found {}", describe(&t.tok)),
            )),
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.next();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.next();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek().tok {
                Tok::Star => {
                    self.next();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Tok::Slash => {
                    self.next();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.peek().tok != Tok::Caret {
            return Ok(base);
        }
        self.next();
        let negative = match self.peek().tok {
            Tok::Minus => {
                self.next();
                true
            }
            Tok::Plus => {
                self.next();
                false
            }
            _ => false,
        };
        let (k, t) = self.index()?;
        let k = i32::try_from(k).map_err(|_| self.syntax(&t, "exponent too large"))?;
        Ok(Expr::Pow(Box::new(base), if negative { -k } else { k }))
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let t = self.next();
        match t.tok.clone() {
            Tok::Number(s) => s
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Expr::Num)
                .ok_or_else(|| self.syntax(&t, format!("malformed number {s:?}"))),
            Tok::Minus => Ok(Expr::Neg(Box::new(self.atom()?))),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) => self.ident(name, &t),
            other => Err(self.syntax(
                &t,
                format!("expected an operand, found {}", describe(&other)),
            )),
        }
    }

    fn ident(&mut self, name: String, t: &Token) -> Result<Expr, ExprError> {
        if let Some(f) = Func::from_name(&name) {
            self.expect(Tok::LParen, "'(' after function name")?;
            let e = self.expr()?;
            self.expect(Tok::RParen, "')'")?;
            return Ok(Expr::Func(f, Box::new(e)));
        }
        if name == "u" && self.peek().tok == Tok::LBracket {
            return self.jet(t);
        }
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty() && digits.chars().all(|c| c.is_ascii_digit()) {
                let i: usize = digits
                    .parse()
                    .map_err(|_| self.syntax(t, "index too large"))?;
                if i == 0 || i > self.set.n() {
                    return Err(ExprError::Signature {
                        line: t.line,
                        col: t.col,
                        msg: format!("space variable x{i} outside x1..x{}", self.set.n()),
                    });
                }
                return Ok(Expr::Var(i - 1));
            }
        }
        Err(ExprError::UnknownIdentifier {
            line: t.line,
            col: t.col,
            name,
        })
    }

    fn jet(&mut self, start: &Token) -> Result<Expr, ExprError> {
        self.expect(Tok::LBracket, "'['")?;
        let (component, _) = self.index()?;
        self.expect(Tok::Comma, "','")?;
        self.expect(Tok::LParen, "'(' opening the multi-index")?;
        let mut alpha = vec![self.index()?.0];
        while self.peek().tok == Tok::Comma {
            self.next();
            alpha.push(self.index()?.0);
        }
        self.expect(Tok::RParen, "')' closing the multi-index")?;
        self.expect(Tok::RBracket, "']'")?;
        let sig_err = |msg: String| ExprError::Signature {
            line: start.line,
            col: start.col,
            msg,
        };
        let (n, k, m) = (self.set.n(), self.set.k(), self.set.m());
        if component == 0 || component as usize > k {
            return Err(sig_err(format!(
                "component index {component} outside 1..={k}"
            )));
        }
        if alpha.len() != n {
            return Err(sig_err(format!(
                "multi-index has {} entries, expected n = {n}",
                alpha.len()
            )));
        }
        let alpha = MultiIndex(alpha);
        let component = component as usize - 1;
        let slot = self
            .set
            .slot(component, &alpha)
            .ok_or_else(|| sig_err(format!("|{alpha}| = {} exceeds m = {m}", alpha.order())))?;
        Ok(Expr::Jet {
            component,
            alpha,
            slot,
        })
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Number(s) => format!("number {s}"),
        Tok::Ident(s) => format!("identifier {s}"),
        Tok::End => "end of input".into(),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::LBracket => "'['".into(),
        Tok::RBracket => "']'".into(),
        Tok::Comma => "','".into(),
        Tok::Plus => "'+'".into(),
        Tok::Minus => "'-'".into(),
        Tok::Star => "'*'".into(),
        Tok::Slash => "'/'".into(),
        Tok::Caret => "'^'".into(),
    }
}

pub(super) fn parse(text: &str, set: &MultiIndexSet) -> Result<Expr, ExprError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, set };
    let e = p.expr()?;
    let t = p.next();
    if t.tok != Tok::End {
        return Err(p.syntax(
            &t,
            format!("unexpected {} after expression", describe(&t.tok)),
        ));
    }
    Ok(e)
}
