//! Error-tolerant recursive-descent parser for a Java subset.
//!
//! Statements or members the grammar does not cover are consumed up to the
//! next `;` or balanced block and kept as an `ExprStmt` over their
//! identifier and literal tokens.

use serde::{Deserialize, Serialize};

use super::lexer::{is_primitive_type, Token, TokenKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AstNode {
    pub kind: String,
    pub children: Vec<AstNode>,
    pub token: Option<Token>,
}

impl AstNode {
    pub fn leaf(kind: &str, token: Token) -> Self {
        AstNode {
            kind: kind.to_string(),
            children: Vec::new(),
            token: Some(token),
        }
    }

    pub fn inner(kind: impl Into<String>, children: Vec<AstNode>) -> Self {
        AstNode {
            kind: kind.into(),
            children,
            token: None,
        }
    }

    /// Internal node, or a leaf carrying `fallback` when nothing was parsed
    /// beneath it (`return;`, `{}`), so internal nodes never end up empty.
    fn inner_or_leaf(kind: &str, children: Vec<AstNode>, fallback: Token) -> Self {
        if children.is_empty() {
            AstNode::leaf(kind, fallback)
        } else {
            AstNode::inner(kind, children)
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn find_all<'a>(&'a self, kind: &str, out: &mut Vec<&'a AstNode>) {
        if self.kind == kind {
            out.push(self);
        }
        for c in &self.children {
            c.find_all(kind, out);
        }
    }

    pub fn leaves(&self) -> Vec<&AstNode> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a AstNode>) {
        if self.is_leaf() {
            out.push(self);
        } else {
            for c in &self.children {
                c.collect_leaves(out);
            }
        }
    }

    /// Compact s-expression rendering, used in tests and debugging.
    pub fn render(&self) -> String {
        match (&self.token, self.children.is_empty()) {
            (Some(t), true) => format!("{}:{}", self.kind, t.text),
            _ => {
                let inner: Vec<String> = self.children.iter().map(AstNode::render).collect();
                format!("({} {})", self.kind, inner.join(" "))
            }
        }
    }
}

/// Parses a token stream into a tree rooted at `CompilationUnit`.
pub fn parse_java_lite(tokens: &[Token]) -> Result<AstNode> {
    check_braces(tokens)?;
    let mut p = Parser { tokens, pos: 0 };
    let mut children = Vec::new();
    while !p.eof() {
        if p.at("package") || p.at("import") {
            p.skip_past(";");
            continue;
        }
        if p.at(";") {
            p.pos += 1;
            continue;
        }
        let save = p.pos;
        p.skip_modifiers();
        if p.at("class") || p.at("interface") || p.at("enum") {
            match p.type_decl() {
                Ok(node) => children.push(node),
                Err(_) => {
                    p.pos = save;
                    p.recover();
                }
            }
        } else {
            p.pos = save;
            p.recover();
        }
    }
    Ok(AstNode::inner("CompilationUnit", children))
}

fn check_braces(tokens: &[Token]) -> Result<()> {
    let mut depth: i64 = 0;
    let mut last_line = 1;
    for t in tokens {
        last_line = t.line;
        if t.kind != TokenKind::Separator {
            continue;
        }
        match t.text.as_str() {
            "{" => depth += 1,
            "}" => {
                depth -= 1;
                if depth < 0 {
                    return Err(Error::Syntax {
                        line: t.line,
                        message: "unmatched `}`".into(),
                    });
                }
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(Error::Syntax {
            line: last_line,
            message: format!("unbalanced braces at end of input ({depth} unclosed)"),
        });
    }
    Ok(())
}

/// Local failure marker; callers rewind and recover.
struct Backtrack;

type PResult<T> = std::result::Result<T, Backtrack>;

const MODIFIERS: &[&str] = &[
    "public", "private", "protected", "static", "final", "abstract", "native", "synchronized",
    "transient", "volatile", "strictfp", "default",
];

const ASSIGN_OPS: &[&str] = &["=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=", ">>>="];

fn binary_precedence(op: &str) -> Option<u8> {
    Some(match op {
        "||" => 1,
        "&&" => 2,
        "|" => 3,
        "^" => 4,
        "&" => 5,
        "==" | "!=" => 6,
        "<" | ">" | "<=" | ">=" | "instanceof" => 7,
        "<<" | ">>" | ">>>" => 8,
        "+" | "-" => 9,
        "*" | "/" | "%" => 10,
        _ => return None,
    })
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
}

impl<'t> Parser<'t> {
    fn eof(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> Option<&'t Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, offset: usize) -> Option<&'t Token> {
        self.tokens.get(self.pos + offset)
    }

    fn at(&self, text: &str) -> bool {
        self.peek().is_some_and(|t| t.is(text))
    }

    fn at_kind(&self, kind: TokenKind) -> bool {
        self.peek().is_some_and(|t| t.kind == kind)
    }

    fn bump(&mut self) -> PResult<Token> {
        let t = self.peek().ok_or(Backtrack)?.clone();
        self.pos += 1;
        Ok(t)
    }

    fn eat(&mut self, text: &str) -> bool {
        if self.at(text) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, text: &str) -> PResult<Token> {
        if self.at(text) {
            self.bump()
        } else {
            Err(Backtrack)
        }
    }

    fn ident(&mut self) -> PResult<AstNode> {
        if self.at_kind(TokenKind::Identifier) {
            Ok(AstNode::leaf("Name", self.bump()?))
        } else {
            Err(Backtrack)
        }
    }

    fn skip_past(&mut self, text: &str) {
        while let Some(t) = self.peek() {
            self.pos += 1;
            if t.is(text) {
                break;
            }
        }
    }

    fn skip_balanced(&mut self, open: &str, close: &str) -> PResult<()> {
        self.expect(open)?;
        let mut depth = 1;
        while depth > 0 {
            let t = self.bump()?;
            if t.is(open) {
                depth += 1;
            } else if t.is(close) {
                depth -= 1;
            }
        }
        Ok(())
    }

    fn skip_annotation(&mut self) -> bool {
        if !self.at("@") || self.peek_at(1).is_some_and(|t| t.is("interface")) {
            return false;
        }
        self.pos += 1;
        while self.at_kind(TokenKind::Identifier) || self.at(".") {
            self.pos += 1;
        }
        if self.at("(") {
            let save = self.pos;
            if self.skip_balanced("(", ")").is_err() {
                self.pos = save;
            }
        }
        true
    }

    fn skip_modifiers(&mut self) {
        loop {
            if self.skip_annotation() {
                continue;
            }
            // `synchronized (x) {}` is a statement, not a modifier.
            if self.at("synchronized") && self.peek_at(1).is_some_and(|t| t.is("(")) {
                return;
            }
            if MODIFIERS.iter().any(|m| self.at(m)) {
                self.pos += 1;
                continue;
            }
            return;
        }
    }

    /// Consumes one unparseable statement or member: up to and including a
    /// `;` at depth zero, or through a balanced `{...}` block. Stops before
    /// a `}` that closes the enclosing block.
    fn recover(&mut self) -> Option<AstNode> {
        let mut leaves = Vec::new();
        let mut depth: i32 = 0;
        let start = self.pos;
        while let Some(t) = self.peek() {
            if t.kind == TokenKind::Separator {
                match t.text.as_str() {
                    "(" | "[" | "{" => depth += 1,
                    ")" | "]" => depth = (depth - 1).max(0),
                    "}" => {
                        if depth == 0 {
                            break;
                        }
                        depth -= 1;
                        if depth == 0 {
                            self.pos += 1;
                            // `} else {`, `} catch (...) {` continue the same statement.
                            if self.at("else") || self.at("catch") || self.at("finally") || self.at("while") {
                                continue;
                            }
                            break;
                        }
                    }
                    ";" if depth == 0 => {
                        self.pos += 1;
                        break;
                    }
                    _ => {}
                }
            }
            if matches!(t.kind, TokenKind::Identifier | TokenKind::Literal) {
                let kind = if t.kind == TokenKind::Identifier { "Name" } else { "Lit" };
                leaves.push(AstNode::leaf(kind, t.clone()));
            }
            self.pos += 1;
        }
        if self.pos == start && !self.eof() && !self.at("}") {
            self.pos += 1;
        }
        if leaves.is_empty() {
            None
        } else {
            Some(AstNode::inner("ExprStmt", leaves))
        }
    }

    // ---- declarations -------------------------------------------------

    fn type_decl(&mut self) -> PResult<AstNode> {
        let kw = self.bump()?;
        let kind = match kw.text.as_str() {
            "class" => "ClassDecl",
            "interface" => "InterfaceDecl",
            _ => "EnumDecl",
        };
        let mut children = vec![self.ident()?];
        while !self.at("{") {
            self.bump()?;
        }
        self.expect("{")?;
        if kind == "EnumDecl" {
            self.enum_constants(&mut children)?;
        }
        self.class_members(&mut children)?;
        self.expect("}")?;
        Ok(AstNode::inner(kind, children))
    }

    fn enum_constants(&mut self, out: &mut Vec<AstNode>) -> PResult<()> {
        while self.at_kind(TokenKind::Identifier) {
            let name = self.bump()?;
            out.push(AstNode::leaf("EnumConstant", name));
            if self.at("(") {
                self.skip_balanced("(", ")")?;
            }
            if self.at("{") {
                self.skip_balanced("{", "}")?;
            }
            if !self.eat(",") {
                break;
            }
        }
        self.eat(";");
        Ok(())
    }

    fn class_members(&mut self, out: &mut Vec<AstNode>) -> PResult<()> {
        while !self.at("}") {
            if self.eof() {
                return Err(Backtrack);
            }
            if self.eat(";") {
                continue;
            }
            let save = self.pos;
            match self.member() {
                Ok(Some(node)) => out.push(node),
                Ok(None) => {}
                Err(Backtrack) => {
                    self.pos = save;
                    if let Some(node) = self.recover() {
                        out.push(node);
                    }
                }
            }
        }
        Ok(())
    }

    fn member(&mut self) -> PResult<Option<AstNode>> {
        self.skip_modifiers();
        if self.at("{") {
            let block = self.block()?;
            return Ok(Some(AstNode::inner("Initializer", vec![block])));
        }
        if self.at("class") || self.at("interface") || self.at("enum") {
            return self.type_decl().map(Some);
        }
        if self.at("<") {
            self.skip_type_args()?;
        }
        // Constructor: `Name (`
        if self.at_kind(TokenKind::Identifier) && self.peek_at(1).is_some_and(|t| t.is("(")) {
            let name = self.ident()?;
            let mut children = vec![name];
            self.params(&mut children)?;
            self.skip_throws()?;
            children.push(self.block()?);
            return Ok(Some(AstNode::inner("ConstructorDecl", children)));
        }
        let ty = self.parse_type()?;
        let name = self.ident()?;
        if self.at("(") {
            let mut children = vec![ty, name];
            self.params(&mut children)?;
            while self.at("[") {
                self.skip_balanced("[", "]")?;
            }
            self.skip_throws()?;
            if self.at("{") {
                children.push(self.block()?);
            } else {
                self.expect(";")?;
            }
            return Ok(Some(AstNode::inner("MethodDecl", children)));
        }
        let mut children = vec![ty];
        children.push(self.declarator(name)?);
        while self.eat(",") {
            let name = self.ident()?;
            children.push(self.declarator(name)?);
        }
        self.expect(";")?;
        Ok(Some(AstNode::inner("FieldDecl", children)))
    }

    fn skip_throws(&mut self) -> PResult<()> {
        if self.eat("throws") {
            while !self.at("{") && !self.at(";") {
                self.bump()?;
            }
        }
        Ok(())
    }

    fn params(&mut self, out: &mut Vec<AstNode>) -> PResult<()> {
        self.expect("(")?;
        if self.eat(")") {
            return Ok(());
        }
        loop {
            self.skip_modifiers();
            let ty = self.parse_type()?;
            self.eat("...");
            let name = self.ident()?;
            while self.at("[") {
                self.skip_balanced("[", "]")?;
            }
            out.push(AstNode::inner("Param", vec![ty, name]));
            if self.eat(")") {
                return Ok(());
            }
            self.expect(",")?;
        }
    }

    fn declarator(&mut self, name: AstNode) -> PResult<AstNode> {
        while self.at("[") {
            self.skip_balanced("[", "]")?;
        }
        let mut children = vec![name];
        if self.eat("=") {
            children.push(if self.at("{") { self.array_init()? } else { self.expr()? });
        }
        Ok(AstNode::inner("VarDecl", children))
    }

    fn parse_type(&mut self) -> PResult<AstNode> {
        let mut children = Vec::new();
        let t = self.peek().ok_or(Backtrack)?;
        if t.kind == TokenKind::Keyword && is_primitive_type(&t.text) {
            children.push(AstNode::leaf("Prim", self.bump()?));
        } else {
            children.push(self.ident()?);
            loop {
                if self.at("<") {
                    if let Some(args) = self.skip_type_args()? {
                        children.push(args);
                    }
                }
                if self.at(".") && self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Identifier) {
                    self.pos += 1;
                    children.push(self.ident()?);
                } else {
                    break;
                }
            }
        }
        let mut kind = "Type";
        while self.at("[") && self.peek_at(1).is_some_and(|t| t.is("]")) {
            self.pos += 2;
            kind = "ArrayType";
        }
        Ok(AstNode::inner(kind, children))
    }

    /// Consumes `<...>` generic arguments, returning their names as leaves.
    fn skip_type_args(&mut self) -> PResult<Option<AstNode>> {
        let mut depth: i32 = 0;
        let mut leaves = Vec::new();
        loop {
            let t = self.bump()?;
            match t.text.as_str() {
                "<" => depth += 1,
                ">" => depth -= 1,
                ">>" => depth -= 2,
                ">>>" => depth -= 3,
                "," | "?" | "." | "&" | "[" | "]" | "extends" | "super" => {}
                _ if t.kind == TokenKind::Identifier => leaves.push(AstNode::leaf("Name", t)),
                _ if t.kind == TokenKind::Keyword && is_primitive_type(&t.text) => {
                    leaves.push(AstNode::leaf("Prim", t))
                }
                _ => return Err(Backtrack),
            }
            if depth < 0 {
                return Err(Backtrack);
            }
            if depth == 0 {
                break;
            }
        }
        Ok(if leaves.is_empty() {
            None
        } else {
            Some(AstNode::inner("TypeArgs", leaves))
        })
    }

    // ---- statements ---------------------------------------------------

    fn block(&mut self) -> PResult<AstNode> {
        let open = self.expect("{")?;
        let mut stmts = Vec::new();
        while !self.at("}") {
            if self.eof() {
                return Err(Backtrack);
            }
            let save = self.pos;
            match self.statement() {
                Ok(Some(s)) => stmts.push(s),
                Ok(None) => {}
                Err(Backtrack) => {
                    self.pos = save;
                    if let Some(s) = self.recover() {
                        stmts.push(s);
                    }
                }
            }
        }
        self.expect("}")?;
        Ok(AstNode::inner_or_leaf("Block", stmts, Token::new(TokenKind::Separator, "{}", open.line)))
    }

    fn statement(&mut self) -> PResult<Option<AstNode>> {
        let t = self.peek().ok_or(Backtrack)?;
        if t.kind == TokenKind::Separator {
            return match t.text.as_str() {
                "{" => self.block().map(Some),
                ";" => {
                    self.pos += 1;
                    Ok(None)
                }
                _ => self.expr_statement().map(Some),
            };
        }
        if t.kind == TokenKind::Keyword {
            match t.text.as_str() {
                "if" => return self.if_stmt().map(Some),
                "for" => return self.for_stmt().map(Some),
                "while" => {
                    self.pos += 1;
                    let cond = self.paren_expr()?;
                    let mut children = vec![cond];
                    children.extend(self.statement()?);
                    return Ok(Some(AstNode::inner("While", children)));
                }
                "do" => {
                    self.pos += 1;
                    let mut children = Vec::new();
                    children.extend(self.statement()?);
                    self.expect("while")?;
                    children.push(self.paren_expr()?);
                    self.expect(";")?;
                    return Ok(Some(AstNode::inner("DoWhile", children)));
                }
                "try" => return self.try_stmt().map(Some),
                "return" => {
                    let kw = self.bump()?;
                    let mut children = Vec::new();
                    if !self.at(";") {
                        children.push(self.expr()?);
                    }
                    self.expect(";")?;
                    return Ok(Some(AstNode::inner_or_leaf("Return", children, kw)));
                }
                "throw" => {
                    self.pos += 1;
                    let e = self.expr()?;
                    self.expect(";")?;
                    return Ok(Some(AstNode::inner("Throw", vec![e])));
                }
                "break" | "continue" => {
                    let kw = self.bump()?;
                    let kind = if kw.text == "break" { "Break" } else { "Continue" };
                    let mut children = Vec::new();
                    if self.at_kind(TokenKind::Identifier) {
                        children.push(self.ident()?);
                    }
                    self.expect(";")?;
                    return Ok(Some(AstNode::inner_or_leaf(kind, children, kw)));
                }
                "switch" | "synchronized" | "class" | "interface" | "enum" | "assert" => {
                    return Err(Backtrack)
                }
                _ => {}
            }
        }
        // `label: stmt`
        if t.kind == TokenKind::Identifier && self.peek_at(1).is_some_and(|n| n.is(":")) {
            self.pos += 2;
            return self.statement();
        }
        if let Some(decl) = self.local_decl()? {
            self.expect(";")?;
            return Ok(Some(decl));
        }
        self.expr_statement().map(Some)
    }

    fn expr_statement(&mut self) -> PResult<AstNode> {
        let e = self.expr()?;
        self.expect(";")?;
        Ok(AstNode::inner("ExprStmt", vec![e]))
    }

    fn paren_expr(&mut self) -> PResult<AstNode> {
        self.expect("(")?;
        let e = self.expr()?;
        self.expect(")")?;
        Ok(e)
    }

    fn if_stmt(&mut self) -> PResult<AstNode> {
        self.expect("if")?;
        let mut children = vec![self.paren_expr()?];
        children.extend(self.statement()?);
        if self.eat("else") {
            let mut else_branch = Vec::new();
            else_branch.extend(self.statement()?);
            if !else_branch.is_empty() {
                children.push(AstNode::inner("Else", else_branch));
            }
        }
        Ok(AstNode::inner("If", children))
    }

    fn for_stmt(&mut self) -> PResult<AstNode> {
        let kw = self.expect("for")?;
        self.expect("(")?;
        let save = self.pos;
        // Enhanced for: `for (T x : xs)`.
        self.skip_modifiers();
        if let Ok(ty) = self.parse_type() {
            if let Ok(name) = self.ident() {
                if self.eat(":") {
                    let iter = self.expr()?;
                    self.expect(")")?;
                    let mut children = vec![AstNode::inner("LocalVar", vec![ty, AstNode::inner("VarDecl", vec![name])]), iter];
                    children.extend(self.statement()?);
                    return Ok(AstNode::inner("ForEach", children));
                }
            }
        }
        self.pos = save;

        let mut children = Vec::new();
        if !self.at(";") {
            if let Some(decl) = self.local_decl()? {
                children.push(decl);
            } else {
                children.push(self.expr()?);
                while self.eat(",") {
                    children.push(self.expr()?);
                }
            }
        }
        self.expect(";")?;
        if !self.at(";") {
            children.push(self.expr()?);
        }
        self.expect(";")?;
        if !self.at(")") {
            children.push(self.expr()?);
            while self.eat(",") {
                children.push(self.expr()?);
            }
        }
        self.expect(")")?;
        children.extend(self.statement()?);
        Ok(AstNode::inner_or_leaf("For", children, kw))
    }

    fn try_stmt(&mut self) -> PResult<AstNode> {
        self.expect("try")?;
        if self.at("(") {
            self.skip_balanced("(", ")")?;
        }
        let mut children = vec![self.block()?];
        while self.eat("catch") {
            self.expect("(")?;
            self.skip_modifiers();
            let mut ty = self.parse_type()?;
            while self.eat("|") {
                let alt = self.parse_type()?;
                ty.children.extend(alt.children);
            }
            let name = self.ident()?;
            self.expect(")")?;
            let body = self.block()?;
            children.push(AstNode::inner("Catch", vec![AstNode::inner("Param", vec![ty, name]), body]));
        }
        if self.eat("finally") {
            children.push(AstNode::inner("Finally", vec![self.block()?]));
        }
        Ok(AstNode::inner("Try", children))
    }

    /// Speculatively parses `Type name [= init], ...`; rewinds and returns
    /// `None` when the tokens do not form a declaration.
    fn local_decl(&mut self) -> PResult<Option<AstNode>> {
        let save = self.pos;
        self.skip_modifiers();
        let ty = match self.parse_type() {
            Ok(ty) => ty,
            Err(_) => {
                self.pos = save;
                return Ok(None);
            }
        };
        let starts_decl = self.at_kind(TokenKind::Identifier)
            && self
                .peek_at(1)
                .is_some_and(|t| t.is("=") || t.is(";") || t.is(",") || t.is("[") || t.is(":"));
        if !starts_decl {
            self.pos = save;
            return Ok(None);
        }
        let mut children = vec![ty];
        let name = self.ident()?;
        children.push(self.declarator(name)?);
        while self.eat(",") {
            let name = self.ident()?;
            children.push(self.declarator(name)?);
        }
        Ok(Some(AstNode::inner("LocalVar", children)))
    }

    // ---- expressions --------------------------------------------------

    fn expr(&mut self) -> PResult<AstNode> {
        let lhs = self.ternary()?;
        if let Some(op) = ASSIGN_OPS.iter().find(|op| self.at(op)) {
            self.pos += 1;
            let rhs = if self.at("{") { self.array_init()? } else { self.expr()? };
            return Ok(AstNode::inner(format!("Assign:{op}"), vec![lhs, rhs]));
        }
        Ok(lhs)
    }

    fn ternary(&mut self) -> PResult<AstNode> {
        let cond = self.binary(1)?;
        if self.eat("?") {
            let a = self.expr()?;
            self.expect(":")?;
            let b = self.expr()?;
            return Ok(AstNode::inner("Conditional", vec![cond, a, b]));
        }
        Ok(cond)
    }

    fn binary(&mut self, min_prec: u8) -> PResult<AstNode> {
        let mut lhs = self.unary()?;
        loop {
            let Some(t) = self.peek() else { break };
            if !matches!(t.kind, TokenKind::Operator | TokenKind::Keyword) {
                break;
            }
            let Some(prec) = binary_precedence(&t.text) else { break };
            if prec < min_prec {
                break;
            }
            let op = self.bump()?.text;
            if op == "instanceof" {
                let ty = self.parse_type()?;
                lhs = AstNode::inner("InstanceOf", vec![lhs, ty]);
                continue;
            }
            let rhs = self.binary(prec + 1)?;
            lhs = AstNode::inner(format!("Binary:{op}"), vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<AstNode> {
        for op in ["!", "~", "-", "+", "++", "--"] {
            if self.at(op) {
                self.pos += 1;
                let operand = self.unary()?;
                return Ok(AstNode::inner(format!("Unary:{op}"), vec![operand]));
            }
        }
        if self.at("(") {
            if let Some(cast) = self.try_cast()? {
                return Ok(cast);
            }
        }
        self.postfix()
    }

    fn try_cast(&mut self) -> PResult<Option<AstNode>> {
        let save = self.pos;
        self.pos += 1;
        let primitive = self
            .peek()
            .is_some_and(|t| t.kind == TokenKind::Keyword && is_primitive_type(&t.text));
        if let Ok(ty) = self.parse_type() {
            if self.eat(")") {
                let next_ok = self.peek().is_some_and(|t| {
                    matches!(t.kind, TokenKind::Identifier | TokenKind::Literal)
                        || t.is("(")
                        || t.is("this")
                        || t.is("new")
                        || t.is("super")
                        || t.is("!")
                        || t.is("~")
                        || (primitive && (t.is("-") || t.is("+")))
                });
                if next_ok {
                    let operand = self.unary()?;
                    return Ok(Some(AstNode::inner("Cast", vec![ty, operand])));
                }
            }
        }
        self.pos = save;
        Ok(None)
    }

    fn postfix(&mut self) -> PResult<AstNode> {
        let mut e = self.primary()?;
        loop {
            if self.at(".") {
                self.pos += 1;
                if self.at("<") {
                    self.skip_type_args()?;
                }
                let name = if self.at("class") || self.at("this") {
                    AstNode::leaf("Name", self.bump()?)
                } else {
                    self.ident()?
                };
                if self.at("(") {
                    let mut children = vec![e, name];
                    self.args(&mut children)?;
                    e = AstNode::inner("Call", children);
                } else {
                    e = AstNode::inner("FieldAccess", vec![e, name]);
                }
            } else if self.at("::") {
                self.pos += 1;
                let name = if self.at("new") {
                    AstNode::leaf("Name", self.bump()?)
                } else {
                    self.ident()?
                };
                e = AstNode::inner("MethodRef", vec![e, name]);
            } else if self.at("[") {
                self.pos += 1;
                let idx = self.expr()?;
                self.expect("]")?;
                e = AstNode::inner("ArrayAccess", vec![e, idx]);
            } else if self.at("++") || self.at("--") {
                let op = self.bump()?.text;
                e = AstNode::inner(format!("Postfix:{op}"), vec![e]);
            } else {
                return Ok(e);
            }
        }
    }

    fn args(&mut self, out: &mut Vec<AstNode>) -> PResult<()> {
        self.expect("(")?;
        if self.eat(")") {
            return Ok(());
        }
        loop {
            out.push(self.expr()?);
            if self.eat(")") {
                return Ok(());
            }
            self.expect(",")?;
        }
    }

    fn array_init(&mut self) -> PResult<AstNode> {
        let open = self.expect("{")?;
        let mut items = Vec::new();
        while !self.at("}") {
            items.push(if self.at("{") { self.array_init()? } else { self.expr()? });
            if !self.eat(",") {
                break;
            }
        }
        self.expect("}")?;
        Ok(AstNode::inner_or_leaf("ArrayInit", items, Token::new(TokenKind::Separator, "{}", open.line)))
    }

    fn primary(&mut self) -> PResult<AstNode> {
        let t = self.peek().ok_or(Backtrack)?;
        match t.kind {
            TokenKind::Literal => Ok(AstNode::leaf("Lit", self.bump()?)),
            TokenKind::Identifier => {
                // Lambdas are outside the grammar.
                if self.peek_at(1).is_some_and(|n| n.is("->")) {
                    return Err(Backtrack);
                }
                let name = self.ident()?;
                if self.at("(") {
                    let mut children = vec![name];
                    self.args(&mut children)?;
                    Ok(AstNode::inner("Call", children))
                } else {
                    Ok(name)
                }
            }
            TokenKind::Keyword => match t.text.as_str() {
                "this" | "super" => {
                    let kind = if t.text == "this" { "This" } else { "Super" };
                    let leaf = AstNode::leaf(kind, self.bump()?);
                    if self.at("(") {
                        let mut children = vec![leaf];
                        self.args(&mut children)?;
                        Ok(AstNode::inner("Call", children))
                    } else {
                        Ok(leaf)
                    }
                }
                "new" => self.creation(),
                _ if is_primitive_type(&t.text) => {
                    // `int.class`
                    let leaf = AstNode::leaf("Prim", self.bump()?);
                    Ok(leaf)
                }
                _ => Err(Backtrack),
            },
            TokenKind::Separator if t.is("(") => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            _ => Err(Backtrack),
        }
    }

    fn creation(&mut self) -> PResult<AstNode> {
        self.expect("new")?;
        let ty = self.parse_type_no_array()?;
        if self.at("[") {
            let mut children = vec![ty];
            while self.at("[") {
                self.pos += 1;
                if !self.at("]") {
                    children.push(self.expr()?);
                }
                self.expect("]")?;
            }
            if self.at("{") {
                children.push(self.array_init()?);
            }
            return Ok(AstNode::inner("NewArray", children));
        }
        let mut children = vec![ty];
        self.args(&mut children)?;
        if self.at("{") {
            // Anonymous class bodies are skipped.
            self.skip_balanced("{", "}")?;
        }
        Ok(AstNode::inner("New", children))
    }

    fn parse_type_no_array(&mut self) -> PResult<AstNode> {
        let mut children = Vec::new();
        let t = self.peek().ok_or(Backtrack)?;
        if t.kind == TokenKind::Keyword && is_primitive_type(&t.text) {
            children.push(AstNode::leaf("Prim", self.bump()?));
        } else {
            children.push(self.ident()?);
            loop {
                if self.at("<") {
                    if let Some(args) = self.skip_type_args()? {
                        children.push(args);
                    }
                }
                if self.at(".") && self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Identifier) {
                    self.pos += 1;
                    children.push(self.ident()?);
                } else {
                    break;
                }
            }
        }
        Ok(AstNode::inner("Type", children))
    }
}

#[cfg(test)]
mod tests {
    use super::super::lexer::tokenize_java;
    use super::*;

    fn parse(src: &str) -> AstNode {
        parse_java_lite(&tokenize_java(src).unwrap()).unwrap()
    }

    fn assert_well_formed(n: &AstNode) {
        if n.kind != "CompilationUnit" {
            assert_eq!(n.is_leaf(), n.token.is_some(), "{}", n.render());
        }
        for c in &n.children {
            assert_well_formed(c);
        }
    }

    #[test]
    fn method_with_bare_return() {
        let tree = parse("class A { void f() { return; } }");
        let expected = "(CompilationUnit (ClassDecl Name:A (MethodDecl (Type Prim:void) Name:f (Block Return:return))))";
        assert_eq!(tree.render(), expected);
        assert_well_formed(&tree);
    }

    #[test]
    fn empty_source() {
        let tree = parse("");
        assert_eq!(tree.kind, "CompilationUnit");
        assert!(tree.children.is_empty());
    }

    #[test]
    fn unbalanced_braces() {
        let toks = tokenize_java("class A { void f() {").unwrap();
        assert!(matches!(parse_java_lite(&toks), Err(Error::Syntax { .. })));
        let toks = tokenize_java("class A { } }").unwrap();
        assert!(matches!(parse_java_lite(&toks), Err(Error::Syntax { .. })));
    }

    #[test]
    fn identity_method() {
        let tree = parse("class C { int id(int a){return a;} }");
        let mut methods = Vec::new();
        tree.find_all("MethodDecl", &mut methods);
        assert_eq!(
            methods[0].render(),
            "(MethodDecl (Type Prim:int) Name:id (Param (Type Prim:int) Name:a) (Block (Return Name:a)))"
        );
    }

    #[test]
    fn statements_and_expressions() {
        let src = r#"
            package x.y;
            import java.util.List;
            public class Box<T> extends Base implements Runnable {
                private static final int LIMIT = 10;
                @Override
                public List<String> items(final Map<String, List<Integer>> m, int[] xs) throws IOException {
                    List<String> out = new ArrayList<>();
                    for (int i = 0; i < xs.length; i++) {
                        if (xs[i] > LIMIT && !done) { out.add("big"); } else out.add(String.valueOf(xs[i]));
                    }
                    for (String k : m.keySet()) { total += (int) k.length(); }
                    while (true) { break; }
                    try { run(); } catch (IllegalStateException | IOException e) { throw e; } finally { close(); }
                    Object o = cond ? a.b.c : new int[] {1, 2};
                    return out;
                }
            }"#;
        let tree = parse(src);
        assert_well_formed(&tree);
        let r = tree.render();
        for kind in ["FieldDecl", "For", "ForEach", "If", "Else", "While", "Try", "Catch", "Finally", "Cast", "Conditional", "NewArray", "New", "Binary:&&", "Postfix:++", "Assign:+="] {
            assert!(r.contains(kind), "missing {kind} in {r}");
        }
        assert!(!r.contains("ExprStmt Name"), "unexpected recovery: {r}");
    }

    #[test]
    fn unsupported_statement_is_wrapped() {
        let tree = parse("class A { void f() { switch (x) { case 1: y(); break; } g(); } }");
        assert_well_formed(&tree);
        let r = tree.render();
        assert!(r.contains("(ExprStmt Name:x Lit:1 Name:y)"), "{r}");
        assert!(r.contains("(ExprStmt (Call Name:g))"), "{r}");
    }

    #[test]
    fn lambda_statement_recovers() {
        let tree = parse("class A { void f() { run(() -> x + 1); return; } }");
        assert_well_formed(&tree);
        assert!(tree.render().contains("Return:return"));
    }

    #[test]
    fn deterministic() {
        let src = "class A { int g(int x) { int y = x * 2; return y + 1; } }";
        assert_eq!(parse(src), parse(src));
    }
}
