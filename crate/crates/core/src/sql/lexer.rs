use super::SqlError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    /// Bare or backtick-quoted identifier; keywords are recognized by the parser.
    Ident(String, bool),
    Number(String),
    Str(String),
    Placeholder,
    Sym(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub pos: usize,
}

const SYMBOLS: [&str; 17] = ["<=", ">=", "!=", "<>", "==", "||", "(", ")", ",", ".", "*", "+", "-", "/", "%", "=", ";"];

pub fn lex(src: &str) -> Result<Vec<Token>, SqlError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_alphabetic() || c == b'_' || c >= 0x80 {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] >= 0x80) {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(src[start..i].to_string(), false), pos: start });
        } else if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            out.push(Token { tok: Tok::Number(src[start..i].to_string()), pos: start });
        } else if c == b'\'' || c == b'"' || c == b'`' {
            let mut text = String::new();
            i += 1;
            loop {
                let Some(rel) = src[i..].find(c as char) else {
                    return Err(SqlError::Syntax { pos: start, msg: "unterminated quoted token".into() });
                };
                text.push_str(&src[i..i + rel]);
                i += rel + 1;
                if bytes.get(i) == Some(&c) {
                    text.push(c as char);
                    i += 1;
                } else {
                    break;
                }
            }
            let tok = if c == b'`' { Tok::Ident(text, true) } else { Tok::Str(text) };
            out.push(Token { tok, pos: start });
        } else if c == b'?' {
            i += 1;
            out.push(Token { tok: Tok::Placeholder, pos: start });
        } else if let Some(sym) = SYMBOLS.iter().find(|s| src[i..].starts_with(**s)) {
            i += sym.len();
            let sym = match *sym {
                "<>" => "!=",
                "==" => "=",
                s => s,
            };
            out.push(Token { tok: Tok::Sym(sym), pos: start });
        } else if c == b'<' || c == b'>' {
            i += 1;
            out.push(Token { tok: Tok::Sym(if c == b'<' { "<" } else { ">" }), pos: start });
        } else {
            let ch = src[i..].chars().next().unwrap_or('?');
            return Err(SqlError::Syntax { pos: start, msg: format!("unexpected character {ch:?}") });
        }
    }
    Ok(out)
}
