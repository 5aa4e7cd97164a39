"""Static validation of generated animation documents against the output contract.

Structural rules are checked by parsing the markup; behavioral rules are
checked by a lexical scan of inline script text with string literals and
comments stripped. No script is ever executed here.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from html.parser import HTMLParser
from urllib.parse import urlparse

ALLOWED_ASSET_ORIGINS = ("https://d3js.org",)

FRAME_WIDTH = "1280"
FRAME_HEIGHT = "720"

RULES = {
    "R1": ("document starts with <!DOCTYPE html> and markup is well-formed", "error"),
    "R2": ('exactly one <svg id="chart"> at fixed 1280x720 resolution', "error"),
    "R3": ("global duration variable window.__VIDEO_DURATION__ is defined", "error"),
    "R4": ("functions resetChart and scheduleNow are defined", "error"),
    "R5": ("scheduleNow is invoked exactly once at top level", "error"),
    "R6": ("no reference to requestAnimationFrame", "error"),
    "R7": ("no external assets beyond the allowed CDN origin", "error"),
    "R8": ("animation is driven by setTimeout; repeated-timer APIs flagged", "warning"),
    "R9": ("all script content is inline", "error"),
    "R10": ("no randomness", "error"),
}


class NoDocumentError(ValueError):
    """Raised when no HTML document can be found in raw model output."""


@dataclass(frozen=True)
class Violation:
    rule_id: str
    message: str
    line: int = 0
    column: int = 0


@dataclass
class ContractReport:
    artifact_id: str
    violations: list[Violation] = field(default_factory=list)
    warnings: list[Violation] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


_DOCTYPE_RE = re.compile(r"<!doctype\s+html", re.IGNORECASE)


def strip_wrapper(raw: str) -> str:
    """Remove code fences and prose around a generated HTML document.

    Returns the content from the first doctype preamble through the final
    closing </html> tag (or end of text if the closing tag is absent).
    """
    if not raw.strip():
        raise NoDocumentError("no document found: empty input")
    m = _DOCTYPE_RE.search(raw)
    if m is None:
        raise NoDocumentError("no document found: missing <!DOCTYPE html>")
    start = m.start()
    end_m = None
    for end_m in re.finditer(r"</html\s*>", raw, re.IGNORECASE):
        pass
    end = end_m.end() if end_m else len(raw)
    return raw[start:end]


def _strip_script_noise(code: str) -> str:
    """Replace string/template literal contents and comments with spaces,
    preserving offsets so line/column positions remain valid."""
    out = list(code)
    i = 0
    n = len(code)

    def blank(a: int, b: int):
        for k in range(a, b):
            if out[k] not in "\n":
                out[k] = " "

    while i < n:
        c = code[i]
        if c in "'\"`":
            quote = c
            j = i + 1
            seg = j  # start of the literal segment currently being blanked
            while j < n:
                if code[j] == "\\":
                    j += 2
                    continue
                if code[j] == quote:
                    break
                # template literal interpolation stays scannable
                if quote == "`" and code[j] == "$" and j + 1 < n and code[j + 1] == "{":
                    blank(seg, j)
                    depth = 1
                    k = j + 2
                    while k < n and depth:
                        if code[k] == "{":
                            depth += 1
                        elif code[k] == "}":
                            depth -= 1
                        k += 1
                    j = k
                    seg = j
                    continue
                j += 1
            blank(seg, min(j, n))
            i = j + 1
            continue
        if c == "/" and i + 1 < n and code[i + 1] == "/":
            j = code.find("\n", i)
            j = n if j < 0 else j
            blank(i, j)
            i = j
            continue
        if c == "/" and i + 1 < n and code[i + 1] == "*":
            j = code.find("*/", i + 2)
            j = n if j < 0 else j + 2
            blank(i, j)
            i = j
            continue
        i += 1
    return "".join(out)


@dataclass
class _ScriptBlock:
    text: str
    line: int  # 1-based line of the <script> open tag
    src: str | None


class _DocWalker(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.doctype: str | None = None
        self.svgs: list[tuple[dict, int, int]] = []
        self.scripts: list[_ScriptBlock] = []
        self.asset_refs: list[tuple[str, str, str, int, int]] = []  # (tag, attr, url, line, col)
        self.structural_seen: set[str] = set()
        self.malformed: list[str] = []
        self._open: list[str] = []
        self._in_script: _ScriptBlock | None = None

    _VOID = {"area", "base", "br", "col", "embed", "hr", "img", "input",
             "link", "meta", "source", "track", "wbr",
             # common self-contained svg leaves
             "path", "rect", "circle", "ellipse", "line", "polyline", "polygon",
             "use", "stop", "image"}

    def handle_decl(self, decl):
        if self.doctype is None:
            self.doctype = decl

    def handle_starttag(self, tag, attrs):
        attrs_d = dict(attrs)
        line, col = self.getpos()
        if tag in ("html", "head", "body"):
            self.structural_seen.add(tag)
        if tag == "svg":
            self.svgs.append((attrs_d, line, col))
        if tag == "script":
            block = _ScriptBlock(text="", line=line, src=attrs_d.get("src"))
            self.scripts.append(block)
            self._in_script = block
        for attr in ("src", "href", "xlink:href"):
            if attrs_d.get(attr):
                self.asset_refs.append((tag, attr, attrs_d[attr], line, col))
        if tag not in self._VOID:
            self._open.append(tag)

    def handle_startendtag(self, tag, attrs):
        self.handle_starttag(tag, attrs)
        if tag not in self._VOID:
            self._open.pop()

    def handle_endtag(self, tag):
        if tag == "script":
            self._in_script = None
        if tag in self._open:
            while self._open and self._open[-1] != tag:
                self.malformed.append(f"unclosed <{self._open.pop()}>")
            if self._open:
                self._open.pop()
        else:
            self.malformed.append(f"stray </{tag}>")

    def handle_data(self, data):
        if self._in_script is not None:
            self._in_script.text += data


_DEF_PATTERNS = {
    name: re.compile(
        rf"(?:function\s+{name}\s*\(|(?:window\.|const\s+|let\s+|var\s+)?{name}\s*=\s*(?:async\s+)?(?:function\b|\())"
    )
    for name in ("resetChart", "scheduleNow")
}
_SCHEDULE_CALL = re.compile(r"(?<![\w.])scheduleNow\s*\(")


def _pos_of(block: _ScriptBlock, offset: int) -> tuple[int, int]:
    prefix = block.text[:offset]
    line = block.line + prefix.count("\n")
    col = len(prefix.rsplit("\n", 1)[-1])
    return line, col


def validate(doc: str, artifact_id: str = "", allowed_origins: tuple[str, ...] = ALLOWED_ASSET_ORIGINS) -> ContractReport:
    """Check every rule R1-R10 and report all violations, not only the first."""
    report = ContractReport(artifact_id=artifact_id)
    errs = report.violations
    warns = report.warnings

    walker = _DocWalker()
    walker.feed(doc)
    walker.close()

    # R1: doctype at the start, structural tags present, balanced markup
    head = doc.lstrip()
    if not _DOCTYPE_RE.match(head):
        errs.append(Violation("R1", "document does not start with <!DOCTYPE html>", 1, 0))
    missing = {"html", "head", "body"} - walker.structural_seen
    if missing:
        errs.append(Violation("R1", f"missing structural tags: {', '.join(sorted(missing))}"))
    for problem in walker.malformed[:5]:
        errs.append(Violation("R1", f"malformed markup: {problem}"))

    # R2: exactly one chart frame at fixed resolution
    chart_svgs = [(a, ln, col) for a, ln, col in walker.svgs if a.get("id") == "chart"]
    if len(chart_svgs) != 1:
        errs.append(
            Violation("R2", f'expected exactly one <svg id="chart">, found {len(chart_svgs)}')
        )
    else:
        attrs, line, col = chart_svgs[0]
        if attrs.get("width") != FRAME_WIDTH or attrs.get("height") != FRAME_HEIGHT:
            errs.append(
                Violation(
                    "R2",
                    f'chart frame must be width="{FRAME_WIDTH}" height="{FRAME_HEIGHT}", '
                    f'got width={attrs.get("width")!r} height={attrs.get("height")!r}',
                    line,
                    col,
                )
            )

    inline = [b for b in walker.scripts if b.src is None]
    stripped = [(b, _strip_script_noise(b.text)) for b in inline]
    all_code = "\n".join(code for _, code in stripped)

    # R3: duration global
    if not re.search(r"window\.__VIDEO_DURATION__\s*=", all_code):
        errs.append(Violation("R3", "window.__VIDEO_DURATION__ is never assigned"))

    # R4: required functions
    for name, pat in _DEF_PATTERNS.items():
        if not pat.search(all_code):
            errs.append(Violation("R4", f"function {name} is not defined"))

    # R5: exactly one top-level invocation of scheduleNow
    calls = 0
    for block, code in stripped:
        for m in _SCHEDULE_CALL.finditer(code):
            # skip the definition site itself
            if re.search(r"function\s+scheduleNow\s*\($", code[max(0, m.start() - 9):m.end()]):
                continue
            calls += 1
    if calls != 1:
        errs.append(Violation("R5", f"scheduleNow() must be invoked exactly once, found {calls} call sites"))

    def scan_token(rule: str, token: str, message: str, sink: list):
        pat = re.compile(re.escape(token))
        for block, code in stripped:
            for m in pat.finditer(code):
                line, col = _pos_of(block, m.start())
                sink.append(Violation(rule, message, line, col))

    # R6: no frame-callback animation
    scan_token("R6", "requestAnimationFrame", "requestAnimationFrame is forbidden", errs)

    # R7: external assets (script srcs are R9's jurisdiction)
    for tag, attr, url, line, col in walker.asset_refs:
        if tag == "script":
            continue
        parsed = urlparse(url)
        if parsed.scheme in ("http", "https"):
            origin = f"{parsed.scheme}://{parsed.netloc}"
            if origin not in allowed_origins:
                errs.append(
                    Violation("R7", f"external asset {url!r} outside allowed CDN origin", line, col)
                )
        elif parsed.scheme in ("data", "about", "javascript"):
            continue
        else:
            errs.append(
                Violation("R7", f"relative asset reference {url!r}; nothing ships beside the document", line, col)
            )

    # R8: timer-driven animation (warnings only)
    if not re.search(r"(?<![\w.])setTimeout\s*\(", all_code):
        warns.append(Violation("R8", "no setTimeout-based schedule found"))
    scan_token("R8", "setInterval", "repeated-timer API setInterval; prefer setTimeout chains", warns)

    # R9: scripts inline (a src pointing at the allowed CDN is the one exception,
    # and R7 already polices the origin)
    for block in walker.scripts:
        if block.src is not None:
            parsed = urlparse(block.src)
            origin = f"{parsed.scheme}://{parsed.netloc}"
            if origin not in allowed_origins:
                errs.append(
                    Violation("R9", f"script with external src {block.src!r}; all script content must be inline", block.line, 0)
                )

    # R10: no randomness
    scan_token("R10", "Math.random", "Math.random is forbidden", errs)

    return report
