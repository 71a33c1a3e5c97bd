"""
ctxrep Java Parser
Method extraction from Java compilation units.

javalang supplies the structure (enclosing classes, parameter types, call sites);
a regex lexer with exact character offsets supplies the method spans. When
javalang rejects the input, a token-level scan recovers what it can.
"""

import re
from bisect import bisect_right
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import javalang
from loguru import logger

from ctxrep.errors import ParseFailure
from ctxrep.models import MethodIdentity


# ==========================================
# LEXER
# ==========================================

JAVA_KEYWORDS = frozenset({
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char",
    "class", "const", "continue", "default", "do", "double", "else", "enum",
    "extends", "final", "finally", "float", "for", "goto", "if", "implements",
    "import", "instanceof", "int", "interface", "long", "native", "new",
    "package", "private", "protected", "public", "return", "short", "static",
    "strictfp", "super", "switch", "synchronized", "this", "throw", "throws",
    "transient", "try", "void", "volatile", "while", "true", "false", "null",
})

PRIMITIVE_TYPES = frozenset({"boolean", "byte", "char", "short", "int", "long", "float", "double", "void"})

_TOKEN_PATTERN = re.compile(
    r"""
    (?P<comment>//[^\n]*|/\*.*?(?:\*/|\Z))
  | (?P<textblock>\"\"\".*?(?:\"\"\"|\Z))
  | (?P<string>"(?:\\.|[^"\\\n])*"?)
  | (?P<char>'(?:\\.|[^'\\\n])*'?)
  | (?P<number>(?:0[xX][0-9a-fA-F_]+|0[bB][01_]+|\d[\d_]*(?:\.[\d_]*)?|\.\d[\d_]*)(?:[eE][+-]?\d+)?[lLfFdD]?)
  | (?P<identifier>[A-Za-z_$][A-Za-z0-9_$]*)
  | (?P<operator>>>>=|<<=|>>=|>>>|\.\.\.|->|::|\+\+|--|&&|\|\||[=!<>+\-*/&|^%]=|<<|>>|[-+*/%=<>!~?:&|^])
  | (?P<separator>[(){}\[\];,.@])
  | (?P<whitespace>\s+)
  | (?P<other>.)
    """,
    re.VERBOSE | re.DOTALL,
)


class JavaToken(NamedTuple):
    kind: str  # keyword, identifier, number, string, char, operator, separator, other
    value: str
    start: int
    end: int


def lex_java(source: str) -> List[JavaToken]:
    """
    Split Java source into significant tokens with exact character offsets.
    Comments and whitespace are dropped. Never raises: unterminated literals
    and stray characters become tokens of their own.
    """
    tokens = []
    for match in _TOKEN_PATTERN.finditer(source):
        kind = match.lastgroup
        if kind in ("comment", "whitespace"):
            continue
        value = match.group()
        if kind == "textblock":
            kind = "string"
        elif kind == "identifier" and value in JAVA_KEYWORDS:
            kind = "keyword"
        tokens.append(JavaToken(kind, value, match.start(), match.end()))
    return tokens


# ==========================================
# RESULT TYPES
# ==========================================

@dataclass(frozen=True)
class MethodSpan:
    """One method declaration: identity fragment plus its exact character span"""

    qualified_name: str  # Outer.Inner.method, anonymous classes as $Type
    signature: str
    start: int
    end: int
    text: str
    invocations: Tuple[Tuple[str, int], ...] = ()  # (simple name, argument count)

    @property
    def name(self) -> str:
        return self.qualified_name.rsplit(".", 1)[-1].split("#", 1)[0]

    @property
    def arity(self) -> int:
        return 0 if not self.signature else self.signature.count(",") + 1

    def identity(self, project: str, file_path: str) -> MethodIdentity:
        return MethodIdentity(
            project=project,
            file_path=file_path,
            qualified_name=self.qualified_name,
            signature=self.signature,
        )


@dataclass
class ParseResult:
    methods: List[MethodSpan] = field(default_factory=list)
    diagnostics: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.diagnostics


@dataclass
class _Declared:
    """A method as javalang (or the fallback scan) sees it, before spans are attached"""

    scope: List[str]
    name: str
    params: List[str]
    line: int
    invocations: List[Tuple[str, int]]


# ==========================================
# TOKEN HELPERS
# ==========================================

def _line_starts(source: str) -> List[int]:
    return [0] + [m.end() for m in re.finditer("\n", source)]


def _matching(tokens: Sequence[JavaToken], open_index: int, opener: str, closer: str) -> int:
    """Index of the token closing tokens[open_index]; last index when unterminated"""
    depth = 0
    for i in range(open_index, len(tokens)):
        value = tokens[i].value
        if value == opener:
            depth += 1
        elif value == closer:
            depth -= 1
            if depth == 0:
                return i
    return len(tokens) - 1


_TYPE_ARGUMENT_TOKENS = frozenset({".", ",", "?", "extends", "super", "&", "[", "]", "@"})


def _closes_type_arguments(tokens: Sequence[JavaToken], index: int) -> bool:
    """Whether the '>' run at tokens[index] closes a type-argument list like List<String>"""
    depth = 0
    i = index
    while i >= 0:
        token = tokens[i]
        value = token.value
        if value and set(value) == {">"}:
            depth += len(value)
        elif value == "<":
            depth -= 1
            if depth == 0:
                # Foo.<T>bar() is a generic call, not a return type
                return i > 0 and tokens[i - 1].kind == "identifier"
        elif not (token.kind == "identifier" or value in PRIMITIVE_TYPES or value in _TYPE_ARGUMENT_TOKENS):
            return False
        i -= 1
    return False


def _is_declaration_site(tokens: Sequence[JavaToken], index: int) -> bool:
    """An identifier followed by '(' and preceded by something that ends a type"""
    if index == 0 or index + 1 >= len(tokens):
        return False
    token = tokens[index]
    if token.kind != "identifier" or tokens[index + 1].value != "(":
        return False
    previous = tokens[index - 1]
    if previous.kind == "identifier":
        return True
    if previous.value in PRIMITIVE_TYPES or previous.value == "]":
        return True
    if previous.value in (">", ">>", ">>>"):
        return _closes_type_arguments(tokens, index - 1)
    return False


def _declaration_start(tokens: Sequence[JavaToken], name_index: int) -> int:
    """First token of the declaration: modifiers, annotations and type parameters included"""
    depth = 0
    i = name_index - 1
    while i >= 0:
        value = tokens[i].value
        if value == ")":
            depth += 1
        elif value == "(":
            if depth == 0:
                break
            depth -= 1
        elif depth == 0 and value in ("{", "}", ";"):
            break
        i -= 1
    return i + 1


def _declaration_end(tokens: Sequence[JavaToken], name_index: int) -> Tuple[int, bool]:
    """Last token of the declaration and whether it has a body"""
    close = _matching(tokens, name_index + 1, "(", ")")
    j = close + 1
    while j < len(tokens) and tokens[j].value not in ("{", ";"):
        j += 1
    if j >= len(tokens):
        return len(tokens) - 1, False
    if tokens[j].value == ";":
        return j, False
    return _matching(tokens, j, "{", "}"), True


# ==========================================
# JAVALANG STRUCTURE
# ==========================================

def _render_type(node) -> str:
    """Dotted type name with array brackets; type arguments are dropped"""
    if node is None:
        return "void"
    parts = []
    current = node
    while current is not None:
        parts.append(current.name)
        current = getattr(current, "sub_type", None)
    return ".".join(parts) + "[]" * len(node.dimensions or [])


def _render_parameter(param) -> str:
    rendered = _render_type(param.type)
    return rendered + "..." if getattr(param, "varargs", False) else rendered


def _scope_of(path) -> List[str]:
    scope = []
    for element in path:
        if isinstance(element, (
            javalang.tree.ClassDeclaration,
            javalang.tree.InterfaceDeclaration,
            javalang.tree.EnumDeclaration,
            javalang.tree.AnnotationDeclaration,
        )):
            scope.append(element.name)
        elif isinstance(element, javalang.tree.EnumConstantDeclaration) and element.body:
            scope.append(element.name)
        elif isinstance(element, javalang.tree.ClassCreator) and element.body:
            scope.append("$" + element.type.name)
    return scope


def _javalang_methods(source: str) -> List[_Declared]:
    tree = javalang.parse.parse(source)
    declared = []
    for path, node in tree.filter(javalang.tree.MethodDeclaration):
        invocations = []
        for _, call in node.filter(javalang.tree.Invocation):
            member = getattr(call, "member", None)
            if member:
                invocations.append((member, len(call.arguments or [])))
        declared.append(_Declared(
            scope=_scope_of(path),
            name=node.name,
            params=[_render_parameter(p) for p in node.parameters],
            line=node.position.line if node.position else 0,
            invocations=invocations,
        ))
    return declared


def _attach_spans(
    source: str,
    tokens: Sequence[JavaToken],
    declared: List[_Declared],
    diagnostics: List[str],
) -> List[MethodSpan]:
    """Pair each declared method with the next unused declaration site of its name"""
    sites: Dict[str, List[int]] = defaultdict(list)
    for i in range(len(tokens)):
        if _is_declaration_site(tokens, i):
            sites[tokens[i].value].append(i)

    starts = _line_starts(source)
    used: Dict[str, int] = defaultdict(lambda: -1)
    spans = []
    for method in sorted(declared, key=lambda d: d.line):
        candidates = [i for i in sites.get(method.name, []) if i > used[method.name]]
        chosen: Optional[int] = next(
            (i for i in candidates if bisect_right(starts, tokens[i].start) >= method.line),
            candidates[0] if candidates else None,
        )
        if chosen is None:
            diagnostics.append(f"line {method.line}: no declaration site found for {method.name}")
            continue
        used[method.name] = chosen
        first = _declaration_start(tokens, chosen)
        last, _ = _declaration_end(tokens, chosen)
        start, end = tokens[first].start, tokens[last].end
        spans.append(MethodSpan(
            qualified_name=".".join(method.scope + [method.name]),
            signature=",".join(method.params),
            start=start,
            end=end,
            text=source[start:end],
            invocations=tuple(method.invocations),
        ))
    return spans


# ==========================================
# FALLBACK SCAN
# ==========================================

def _split_top_level(tokens: Sequence[JavaToken]) -> List[List[JavaToken]]:
    """Split a parameter list on commas outside brackets and type arguments"""
    groups: List[List[JavaToken]] = [[]]
    depth = 0
    for token in tokens:
        value = token.value
        if value in ("(", "[", "{") or value == "<":
            depth += 1
        elif value in (")", "]", "}"):
            depth -= 1
        elif value and set(value) == {">"}:
            depth -= len(value)
        if value == "," and depth == 0:
            groups.append([])
        else:
            groups[-1].append(token)
    return [g for g in groups if g]


def _scan_parameter(tokens: List[JavaToken]) -> str:
    """Render one formal parameter's type the way javalang would"""
    kept = []
    i = 0
    angle = 0
    while i < len(tokens):
        token = tokens[i]
        value = token.value
        if value == "@" and angle == 0:
            i += 2
            if i < len(tokens) and tokens[i].value == "(":
                i = _matching(tokens, i, "(", ")") + 1
            continue
        if value == "<":
            angle += 1
        elif value and set(value) == {">"}:
            angle -= len(value)
        elif angle == 0 and value != "final":
            kept.append(token)
        i += 1
    # the parameter name is the last identifier; brackets after it belong to the type
    names = [k for k, t in enumerate(kept) if t.kind == "identifier"]
    if len(names) > 1 or (names and any(t.value in PRIMITIVE_TYPES for t in kept)):
        del kept[names[-1]]
    return "".join(t.value for t in kept)


def _skip_type_arguments(tokens: Sequence[JavaToken], open_index: int) -> int:
    """Index just past the '>' closing the '<' at open_index"""
    depth = 0
    for i in range(open_index, len(tokens)):
        value = tokens[i].value
        if value == "<":
            depth += 1
        elif value and set(value) == {">"}:
            depth -= len(value)
            if depth <= 0:
                return i + 1
    return len(tokens)


def _count_arguments(tokens: Sequence[JavaToken], open_index: int) -> int:
    close = _matching(tokens, open_index, "(", ")")
    if close == open_index + 1:
        return 0
    depth = 0
    count = 1
    for token in tokens[open_index + 1:close]:
        if token.value in ("(", "[", "{"):
            depth += 1
        elif token.value in (")", "]", "}"):
            depth -= 1
        elif token.value == "," and depth == 0:
            count += 1
    return count


def _scan_invocations(tokens: Sequence[JavaToken], first: int, last: int) -> List[Tuple[str, int]]:
    calls = []
    for k in range(first, last):
        token = tokens[k]
        if token.kind != "identifier" or tokens[k + 1].value != "(":
            continue
        if k > 0 and tokens[k - 1].value == "new":
            continue
        if _is_declaration_site(tokens, k):
            continue
        calls.append((token.value, _count_arguments(tokens, k + 1)))
    return calls


def _enum_constant_brace(tokens: Sequence[JavaToken], index: int) -> Optional[int]:
    """Index of the body brace when tokens[index] starts an enum constant like PLUS { or PLUS(1) {"""
    if tokens[index].kind != "identifier" or tokens[index - 1].value not in ("{", ","):
        return None
    j = index + 1
    if j < len(tokens) and tokens[j].value == "(":
        j = _matching(tokens, j, "(", ")") + 1
    return j if j < len(tokens) and tokens[j].value == "{" else None


def _scan_methods(source: str, tokens: Sequence[JavaToken]) -> List[MethodSpan]:
    """Token-level recovery for sources javalang cannot parse"""
    spans = []
    # (kind, name) per open brace; "enum" marks an enum body until its constants end
    scope: List[Tuple[str, Optional[str]]] = []
    pending_type: Optional[Tuple[str, str]] = None
    named_braces: Dict[int, str] = {}

    for i, token in enumerate(tokens):
        value = token.value
        if token.kind == "keyword" and value in ("class", "interface", "enum"):
            if i + 1 < len(tokens) and tokens[i + 1].kind == "identifier" and (i == 0 or tokens[i - 1].value != "."):
                pending_type = ("enum" if value == "enum" else "type", tokens[i + 1].value)
        elif value == "new" and i + 1 < len(tokens) and tokens[i + 1].kind == "identifier":
            j = i + 1
            type_name = tokens[j].value
            while j + 2 < len(tokens) and tokens[j + 1].value == "." and tokens[j + 2].kind == "identifier":
                j += 2
                type_name = tokens[j].value
            j += 1
            if j < len(tokens) and tokens[j].value == "<":
                j = _skip_type_arguments(tokens, j)
            if j < len(tokens) and tokens[j].value == "(":
                close = _matching(tokens, j, "(", ")")
                if close + 1 < len(tokens) and tokens[close + 1].value == "{":
                    named_braces[close + 1] = "$" + type_name
        elif value == "{":
            if pending_type is not None:
                scope.append(pending_type)
                pending_type = None
            elif i in named_braces:
                scope.append(("type", named_braces[i]))
            else:
                scope.append(("block", None))
        elif value == "}":
            if scope:
                scope.pop()
        elif value == ";" and scope and scope[-1][0] == "enum":
            scope[-1] = ("type", scope[-1][1])
        elif scope and scope[-1][0] == "enum":
            brace = _enum_constant_brace(tokens, i)
            if brace is not None:
                named_braces[brace] = value
        elif scope and scope[-1][0] == "type" and _is_declaration_site(tokens, i):
            first = _declaration_start(tokens, i)
            if any(t.value in ("class", "interface", "enum", "=") for t in tokens[first:i]):
                continue
            close = _matching(tokens, i + 1, "(", ")")
            params = [_scan_parameter(group) for group in _split_top_level(tokens[i + 2:close])]
            last, has_body = _declaration_end(tokens, i)
            start, end = tokens[first].start, tokens[last].end
            names = [name for kind, name in scope if kind in ("type", "enum") and name]
            spans.append(MethodSpan(
                qualified_name=".".join(names + [value]),
                signature=",".join(params),
                start=start,
                end=end,
                text=source[start:end],
                invocations=tuple(_scan_invocations(tokens, close + 1, last) if has_body else ()),
            ))
    return spans


# ==========================================
# PUBLIC API
# ==========================================

def _disambiguate(spans: List[MethodSpan]) -> List[MethodSpan]:
    """Suffix repeated (qualified_name, signature) pairs with #2, #3, ..."""
    seen: Dict[Tuple[str, str], int] = defaultdict(int)
    result = []
    for span in spans:
        key = (span.qualified_name, span.signature)
        seen[key] += 1
        if seen[key] > 1:
            span = MethodSpan(
                qualified_name=f"{span.qualified_name}#{seen[key]}",
                signature=span.signature,
                start=span.start,
                end=span.end,
                text=span.text,
                invocations=span.invocations,
            )
        result.append(span)
    return result


def parse_java(source: str, strict: bool = False) -> ParseResult:
    """
    Extract every method declaration from a compilation unit.

    Args:
        source: Java source text
        strict: raise ParseFailure instead of returning diagnostics

    Returns:
        ParseResult with methods in source order
    """
    tokens = lex_java(source)
    if not tokens:
        return ParseResult()

    diagnostics: List[str] = []
    try:
        spans = _attach_spans(source, tokens, _javalang_methods(source), diagnostics)
    except (javalang.parser.JavaSyntaxError, javalang.tokenizer.LexerError) as e:
        where = getattr(getattr(e, "at", None), "position", None)
        line = f"line {where.line}: " if where else ""
        diagnostics.append(f"{line}{type(e).__name__}: {getattr(e, 'description', '') or e}")
        spans = _scan_methods(source, tokens)
    except Exception as e:
        diagnostics.append(f"{type(e).__name__}: {e}")
        spans = _scan_methods(source, tokens)

    spans = _disambiguate(sorted(spans, key=lambda s: s.start))
    if diagnostics and strict:
        raise ParseFailure(
            f"Java source did not parse cleanly ({len(diagnostics)} diagnostic(s))",
            methods=spans,
            diagnostics=diagnostics,
        )
    return ParseResult(methods=spans, diagnostics=diagnostics)


def extract_methods(source: str, where: str = "<source>") -> List[MethodSpan]:
    """Tolerant extraction: diagnostics are logged, partial results returned"""
    result = parse_java(source)
    for diagnostic in result.diagnostics:
        logger.warning(f"[PARSE] {where}: {diagnostic}")
    return result.methods
