//! Minimal JSON reader that records the line and column of every node, so
//! spec diagnostics can point at their source. Serialization goes through
//! `serde_json`; this reader exists only because parse diagnostics need
//! positions.

use std::fmt;

/// A parsed JSON value plus the position where it started.
#[derive(Debug, Clone)]
pub struct Node {
    pub value: JsonValue,
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone)]
pub enum JsonValue {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Arr(Vec<Node>),
    Obj(Vec<(String, Node)>),
}

impl Node {
    pub fn type_name(&self) -> &'static str {
        match self.value {
            JsonValue::Null => "null",
            JsonValue::Bool(_) => "boolean",
            JsonValue::Int(_) | JsonValue::Float(_) => "number",
            JsonValue::Str(_) => "string",
            JsonValue::Arr(_) => "array",
            JsonValue::Obj(_) => "object",
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match &self.value {
            JsonValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self.value {
            JsonValue::Int(i) => Some(i as f64),
            JsonValue::Float(f) => Some(f),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self.value {
            JsonValue::Int(i) => Some(i),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self.value {
            JsonValue::Bool(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_array(&self) -> Option<&[Node]> {
        match &self.value {
            JsonValue::Arr(items) => Some(items),
            _ => None,
        }
    }

    pub fn as_object(&self) -> Option<&[(String, Node)]> {
        match &self.value {
            JsonValue::Obj(fields) => Some(fields),
            _ => None,
        }
    }

    /// Field lookup on an object node.
    pub fn get(&self, key: &str) -> Option<&Node> {
        self.as_object()
            .and_then(|fields| fields.iter().find(|(k, _)| k == key).map(|(_, v)| v))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JsonError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl fmt::Display for JsonError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for JsonError {}

pub fn parse_json(text: &str) -> Result<Node, JsonError> {
    let mut r = Reader::new(text);
    r.skip_ws();
    let node = r.parse_value()?;
    r.skip_ws();
    if !r.at_end() {
        return Err(r.error("trailing characters after JSON document"));
    }
    Ok(node)
}

struct Reader<'a> {
    bytes: &'a [u8],
    src: &'a str,
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Reader<'a> {
    fn new(src: &'a str) -> Reader<'a> {
        Reader {
            bytes: src.as_bytes(),
            src,
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek()?;
        self.pos += 1;
        if b == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(b)
    }

    fn error(&self, message: impl Into<String>) -> JsonError {
        JsonError {
            line: self.line,
            col: self.col,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\n' | b'\r')) {
            self.bump();
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), JsonError> {
        if self.peek() == Some(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected `{}`", c as char)))
        }
    }

    fn parse_value(&mut self) -> Result<Node, JsonError> {
        self.skip_ws();
        let (line, col) = (self.line, self.col);
        let value = match self.peek() {
            Some(b'{') => self.parse_object()?,
            Some(b'[') => self.parse_array()?,
            Some(b'"') => JsonValue::Str(self.parse_string()?),
            Some(b't') => {
                self.parse_keyword("true")?;
                JsonValue::Bool(true)
            }
            Some(b'f') => {
                self.parse_keyword("false")?;
                JsonValue::Bool(false)
            }
            Some(b'n') => {
                self.parse_keyword("null")?;
                JsonValue::Null
            }
            Some(c) if c == b'-' || c.is_ascii_digit() => self.parse_number()?,
            Some(c) => return Err(self.error(format!("unexpected character `{}`", c as char))),
            None => return Err(self.error("unexpected end of input")),
        };
        Ok(Node { value, line, col })
    }

    fn parse_keyword(&mut self, kw: &str) -> Result<(), JsonError> {
        if self.src[self.pos..].starts_with(kw) {
            for _ in 0..kw.len() {
                self.bump();
            }
            Ok(())
        } else {
            Err(self.error(format!("expected `{kw}`")))
        }
    }

    fn parse_object(&mut self) -> Result<JsonValue, JsonError> {
        self.expect(b'{')?;
        let mut fields: Vec<(String, Node)> = Vec::new();
        self.skip_ws();
        if self.peek() == Some(b'}') {
            self.bump();
            return Ok(JsonValue::Obj(fields));
        }
        loop {
            self.skip_ws();
            if self.peek() != Some(b'"') {
                return Err(self.error("expected object key"));
            }
            let key_line = self.line;
            let key_col = self.col;
            let key = self.parse_string()?;
            if fields.iter().any(|(k, _)| *k == key) {
                return Err(JsonError {
                    line: key_line,
                    col: key_col,
                    message: format!("duplicate object key `{key}`"),
                });
            }
            self.skip_ws();
            self.expect(b':')?;
            let value = self.parse_value()?;
            fields.push((key, value));
            self.skip_ws();
            match self.peek() {
                Some(b',') => {
                    self.bump();
                }
                Some(b'}') => {
                    self.bump();
                    return Ok(JsonValue::Obj(fields));
                }
                _ => return Err(self.error("expected `,` or `}`")),
            }
        }
    }

    fn parse_array(&mut self) -> Result<JsonValue, JsonError> {
        self.expect(b'[')?;
        let mut items = Vec::new();
        self.skip_ws();
        if self.peek() == Some(b']') {
            self.bump();
            return Ok(JsonValue::Arr(items));
        }
        loop {
            items.push(self.parse_value()?);
            self.skip_ws();
            match self.peek() {
                Some(b',') => {
                    self.bump();
                }
                Some(b']') => {
                    self.bump();
                    return Ok(JsonValue::Arr(items));
                }
                _ => return Err(self.error("expected `,` or `]`")),
            }
        }
    }

    fn parse_string(&mut self) -> Result<String, JsonError> {
        self.expect(b'"')?;
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(self.error("unterminated string")),
                Some(b'"') => return Ok(out),
                Some(b'\\') => {
                    let esc = self.bump().ok_or_else(|| self.error("unterminated escape"))?;
                    match esc {
                        b'"' => out.push('"'),
                        b'\\' => out.push('\\'),
                        b'/' => out.push('/'),
                        b'b' => out.push('\u{0008}'),
                        b'f' => out.push('\u{000C}'),
                        b'n' => out.push('\n'),
                        b'r' => out.push('\r'),
                        b't' => out.push('\t'),
                        b'u' => {
                            let cp = self.parse_hex4()?;
                            let ch = if (0xD800..=0xDBFF).contains(&cp) {
                                // Surrogate pair.
                                if self.bump() != Some(b'\\') || self.bump() != Some(b'u') {
                                    return Err(self.error("expected low surrogate"));
                                }
                                let lo = self.parse_hex4()?;
                                if !(0xDC00..=0xDFFF).contains(&lo) {
                                    return Err(self.error("invalid low surrogate"));
                                }
                                let c = 0x10000 + ((cp - 0xD800) << 10) + (lo - 0xDC00);
                                char::from_u32(c).ok_or_else(|| self.error("invalid code point"))?
                            } else {
                                char::from_u32(cp).ok_or_else(|| self.error("invalid code point"))?
                            };
                            out.push(ch);
                        }
                        _ => return Err(self.error("unknown escape")),
                    }
                }
                Some(c) if c < 0x20 => return Err(self.error("control character in string")),
                Some(c) if c < 0x80 => out.push(c as char),
                Some(first) => {
                    // Multi-byte UTF-8: the input is a &str, so it is valid.
                    let len = match first {
                        0xC0..=0xDF => 2,
                        0xE0..=0xEF => 3,
                        _ => 4,
                    };
                    let start = self.pos - 1;
                    for _ in 1..len {
                        self.bump();
                    }
                    out.push_str(&self.src[start..start + len]);
                }
            }
        }
    }

    fn parse_hex4(&mut self) -> Result<u32, JsonError> {
        let mut v = 0u32;
        for _ in 0..4 {
            let c = self.bump().ok_or_else(|| self.error("unterminated \\u escape"))?;
            let d = (c as char)
                .to_digit(16)
                .ok_or_else(|| self.error("invalid hex digit"))?;
            v = v * 16 + d;
        }
        Ok(v)
    }

    fn parse_number(&mut self) -> Result<JsonValue, JsonError> {
        let start = self.pos;
        if self.peek() == Some(b'-') {
            self.bump();
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.bump();
        }
        let mut is_float = false;
        if self.peek() == Some(b'.') {
            is_float = true;
            self.bump();
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.bump();
            }
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            is_float = true;
            self.bump();
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.bump();
            }
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.bump();
            }
        }
        let text = &self.src[start..self.pos];
        if is_float {
            text.parse::<f64>()
                .map(JsonValue::Float)
                .map_err(|e| self.error(format!("bad number `{text}`: {e}")))
        } else {
            match text.parse::<i64>() {
                Ok(i) => Ok(JsonValue::Int(i)),
                // Integer literals beyond i64 fall back to floats.
                Err(_) => text
                    .parse::<f64>()
                    .map(JsonValue::Float)
                    .map_err(|e| self.error(format!("bad number `{text}`: {e}"))),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_are_recorded() {
        let n = parse_json("{\n  \"a\": [1, 2.5],\n  \"b\": \"x\"\n}").unwrap();
        assert_eq!((n.line, n.col), (1, 1));
        let a = n.get("a").unwrap();
        assert_eq!((a.line, a.col), (2, 8));
        let items = a.as_array().unwrap();
        assert_eq!(items[0].as_i64(), Some(1));
        assert!(matches!(items[1].value, JsonValue::Float(f) if f == 2.5));
        let b = n.get("b").unwrap();
        assert_eq!((b.line, b.col), (3, 8));
    }

    #[test]
    fn integers_and_floats_are_distinguished() {
        let n = parse_json("[3, 3.0]").unwrap();
        let items = n.as_array().unwrap();
        assert!(matches!(items[0].value, JsonValue::Int(3)));
        assert!(matches!(items[1].value, JsonValue::Float(f) if f == 3.0));
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        assert!(parse_json("{\"a\": 1, \"a\": 2}").is_err());
    }

    #[test]
    fn escapes_and_unicode() {
        let n = parse_json("\"a\\n\\u00e9\\ud83d\\ude00\"").unwrap();
        assert_eq!(n.as_str(), Some("a\né😀"));
    }

    #[test]
    fn syntax_error_carries_position() {
        let err = parse_json("{\"a\": }").unwrap_err();
        assert_eq!(err.line, 1);
        assert_eq!(err.col, 7);
    }
}
