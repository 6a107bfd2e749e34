"""Versioned YAML configuration: parsing, validation and option schemas."""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import yaml

from .glob import GlobError, compile_glob

API_VERSION = "ingest/v1alpha1"
KIND = "Config"

SERVER_TYPES = ("http",)
APP_TYPES = ("cmafIngest", "dashAndHlsIngest", "genericServe")
FUNCTION_TYPES = ("copy", "manifest", "cloudEvent", "cleanup")
VOLUME_TYPES = ("null", "mem", "fs")


class ConfigError(Exception):
    """The document could not be turned into a Config."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class UnsupportedDocumentError(ConfigError):
    pass


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


# durations


_DURATION_UNITS = {"ns": 1e-6, "us": 1e-3, "µs": 1e-3, "ms": 1.0, "s": 1000.0, "m": 60_000.0, "h": 3_600_000.0}
_DURATION_PART = re.compile(r"(\d+(?:\.\d*)?|\.\d+)(ns|us|µs|ms|s|m|h)")


def parse_duration(text: str) -> float:
    """Parse a Go-style duration such as ``"1m30s"`` into milliseconds."""
    if not isinstance(text, str) or not text:
        raise ValueError(f"invalid duration {text!r}")
    if text == "0":
        return 0.0
    pos, total = 0, 0.0
    while pos < len(text):
        m = _DURATION_PART.match(text, pos)
        if m is None:
            raise ValueError(f"invalid duration {text!r}")
        total += float(m.group(1)) * _DURATION_UNITS[m.group(2)]
        pos = m.end()
    return total


def format_duration(ms: float) -> str:
    if ms % 1000 == 0:
        return f"{int(ms // 1000)}s"
    return f"{ms:g}ms"


def parse_address(address: str) -> tuple[str, int]:
    """Split ``host:port``; an empty host means all interfaces."""
    if not isinstance(address, str) or ":" not in address:
        raise ValueError(f"address {address!r} is not host:port")
    host, _, port_s = address.rpartition(":")
    if host.startswith("[") and host.endswith("]"):
        host = host[1:-1]
    if not port_s.isdigit() or not 0 <= int(port_s) <= 65535:
        raise ValueError(f"invalid port in {address!r}")
    return host, int(port_s)


# document model


@dataclass
class BasicAuthCfg:
    username: str
    password: str
    realm: str = "ingest"


@dataclass
class CorsCfg:
    allowOrigins: list[str] = field(default_factory=lambda: ["*"])
    allowMethods: list[str] = field(default_factory=lambda: ["GET", "HEAD", "PUT", "POST", "DELETE", "OPTIONS"])
    allowHeaders: list[str] = field(default_factory=list)
    maxAge: str | None = None


@dataclass
class FunctionCfg:
    name: str
    type: str
    options: dict[str, Any] = field(default_factory=dict)


@dataclass
class AppCfg:
    name: str
    type: str
    mountPath: str = "/"
    hostPattern: str = "**"
    auth: BasicAuthCfg | None = None
    cors: CorsCfg | None = None
    volumeRefs: list[str] = field(default_factory=list)
    appOptions: dict[str, Any] = field(default_factory=dict)
    functions: list[FunctionCfg] = field(default_factory=list)


@dataclass
class ServerCfg:
    name: str
    type: str
    address: str
    options: dict[str, Any] = field(default_factory=dict)
    apps: list[AppCfg] = field(default_factory=list)


@dataclass
class VolumeCfg:
    name: str
    type: str
    options: dict[str, Any] = field(default_factory=dict)


@dataclass
class Config:
    apiVersion: str = API_VERSION
    kind: str = KIND
    servers: list[ServerCfg] = field(default_factory=list)
    volumes: list[VolumeCfg] = field(default_factory=list)

    def apps(self) -> list[AppCfg]:
        return [a for s in self.servers for a in s.apps]

    def app(self, name: str) -> AppCfg | None:
        return next((a for a in self.apps() if a.name == name), None)

    def to_dict(self) -> dict[str, Any]:
        def prune(v):
            if isinstance(v, dict):
                return {k: prune(x) for k, x in v.items() if x is not None}
            if isinstance(v, list):
                return [prune(x) for x in v]
            return v
        return prune(asdict(self))


def dump_config(cfg: Config) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


# parsing


class _Reader:
    """Shape-checks plain YAML data into dataclasses, tracking the document path."""

    def mapping(self, v: Any, path: str, allowed: tuple[str, ...], required: tuple[str, ...] = ()) -> dict:
        if not isinstance(v, dict):
            raise ConfigError(f"{path}: expected a mapping")
        unknown = sorted(set(map(str, v)) - set(allowed))
        if unknown:
            raise ConfigError(f"{path}: unknown key(s) {', '.join(unknown)}")
        for k in required:
            if k not in v:
                raise ConfigError(f"{path}.{k}: required")
        return v

    def seq(self, v: Any, path: str) -> list:
        if v is None:
            return []
        if not isinstance(v, list):
            raise ConfigError(f"{path}: expected a list")
        return v

    def string(self, v: Any, path: str) -> str:
        if not isinstance(v, str):
            raise ConfigError(f"{path}: expected a string")
        return v

    def strings(self, v: Any, path: str) -> list[str]:
        return [self.string(x, f"{path}[{i}]") for i, x in enumerate(self.seq(v, path))]

    def options(self, v: Any, path: str) -> dict[str, Any]:
        if v is None:
            return {}
        if not isinstance(v, dict):
            raise ConfigError(f"{path}: expected a mapping")
        return {str(k): x for k, x in v.items()}


def _parse_function(r: _Reader, d: Any, path: str) -> FunctionCfg:
    d = r.mapping(d, path, ("name", "type", "options"), ("name", "type"))
    return FunctionCfg(r.string(d["name"], f"{path}.name"), r.string(d["type"], f"{path}.type"),
                       r.options(d.get("options"), f"{path}.options"))


def _parse_app(r: _Reader, d: Any, path: str) -> AppCfg:
    d = r.mapping(d, path, ("name", "type", "mountPath", "hostPattern", "auth", "cors", "volumeRefs",
                            "appOptions", "functions"), ("name", "type"))
    auth = None
    if d.get("auth") is not None:
        a = r.mapping(d["auth"], f"{path}.auth", ("username", "password", "realm"), ("username", "password"))
        auth = BasicAuthCfg(r.string(a["username"], f"{path}.auth.username"),
                            r.string(a["password"], f"{path}.auth.password"),
                            r.string(a.get("realm", "ingest"), f"{path}.auth.realm"))
    cors = None
    if d.get("cors") is not None:
        c = r.mapping(d["cors"], f"{path}.cors", ("allowOrigins", "allowMethods", "allowHeaders", "maxAge"))
        cors = CorsCfg()
        for k in ("allowOrigins", "allowMethods", "allowHeaders"):
            if k in c:
                setattr(cors, k, r.strings(c[k], f"{path}.cors.{k}"))
        if c.get("maxAge") is not None:
            cors.maxAge = r.string(c["maxAge"], f"{path}.cors.maxAge")
    return AppCfg(
        name=r.string(d["name"], f"{path}.name"),
        type=r.string(d["type"], f"{path}.type"),
        mountPath=r.string(d.get("mountPath", "/"), f"{path}.mountPath"),
        hostPattern=r.string(d.get("hostPattern") or "**", f"{path}.hostPattern"),
        auth=auth,
        cors=cors,
        volumeRefs=r.strings(d.get("volumeRefs"), f"{path}.volumeRefs"),
        appOptions=r.options(d.get("appOptions"), f"{path}.appOptions"),
        functions=[_parse_function(r, f, f"{path}.functions[{i}]")
                   for i, f in enumerate(r.seq(d.get("functions"), f"{path}.functions"))],
    )


def parse_config(text: str) -> Config:
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as e:
        mark = e.problem_mark or e.context_mark
        raise ConfigError(f"YAML syntax error: {e.problem}", mark.line + 1 if mark else None) from None
    except yaml.YAMLError as e:
        raise ConfigError(f"YAML syntax error: {e}") from None
    r = _Reader()
    d = r.mapping(doc, "$", ("apiVersion", "kind", "servers", "volumes"), ("apiVersion", "kind"))
    if d["apiVersion"] != API_VERSION or d["kind"] != KIND:
        raise UnsupportedDocumentError(
            f"unsupported document apiVersion={d['apiVersion']!r} kind={d['kind']!r}, "
            f"expected {API_VERSION}/{KIND}")
    servers = []
    for i, s in enumerate(r.seq(d.get("servers"), "$.servers")):
        p = f"$.servers[{i}]"
        s = r.mapping(s, p, ("name", "type", "address", "options", "apps"), ("name", "type", "address"))
        servers.append(ServerCfg(
            name=r.string(s["name"], f"{p}.name"),
            type=r.string(s["type"], f"{p}.type"),
            address=r.string(s["address"], f"{p}.address"),
            options=r.options(s.get("options"), f"{p}.options"),
            apps=[_parse_app(r, a, f"{p}.apps[{j}]") for j, a in enumerate(r.seq(s.get("apps"), f"{p}.apps"))],
        ))
    volumes = []
    for i, v in enumerate(r.seq(d.get("volumes"), "$.volumes")):
        p = f"$.volumes[{i}]"
        v = r.mapping(v, p, ("name", "type", "options"), ("name", "type"))
        volumes.append(VolumeCfg(r.string(v["name"], f"{p}.name"), r.string(v["type"], f"{p}.type"),
                                 r.options(v.get("options"), f"{p}.options")))
    return Config(d["apiVersion"], d["kind"], servers, volumes)


def load_config(path: str) -> Config:
    with open(path, encoding="utf-8") as f:
        return parse_config(f.read())


# option schemas


def _positive_int(v: Any) -> str | None:
    if isinstance(v, bool) or not isinstance(v, int) or v <= 0:
        return "must be a positive integer"
    return None


def _duration(v: Any) -> str | None:
    try:
        parse_duration(v)
    except ValueError:
        return "must be a duration such as '30s' or '2m'"
    return None


def _positive_duration(v: Any) -> str | None:
    err = _duration(v)
    if err is None and parse_duration(v) <= 0:
        return "must be positive"
    return err


def _bool(v: Any) -> str | None:
    return None if isinstance(v, bool) else "must be a boolean"


def _nonempty_str(v: Any) -> str | None:
    return None if isinstance(v, str) and v else "must be a non-empty string"


def _str_list(v: Any) -> str | None:
    if not isinstance(v, list) or not v or not all(isinstance(x, str) and x for x in v):
        return "must be a non-empty list of strings"
    return None


def _one_of(*choices: str) -> Callable[[Any], str | None]:
    def check(v: Any) -> str | None:
        return None if v in choices else f"must be one of {', '.join(choices)}"
    return check


def _glob_list(v: Any) -> str | None:
    err = _str_list(v)
    if err:
        return err
    for p in v:
        try:
            compile_glob(p, "/")
        except GlobError as e:
            return str(e)
    return None


# key -> (checker, required)
Schema = dict[str, tuple[Callable[[Any], str | None], bool]]

SERVER_OPTIONS: dict[str, Schema] = {
    "http": {"idleTimeout": (_positive_duration, False), "drainTimeout": (_positive_duration, False)},
}
VOLUME_OPTIONS: dict[str, Schema] = {
    "null": {},
    "mem": {"blockSize": (_positive_int, False)},
    "fs": {"rootPath": (_nonempty_str, True)},
}
APP_OPTIONS: dict[str, Schema] = {
    "cmafIngest": {
        "maxHeaderBytes": (_positive_int, False),
        "maxFragmentBytes": (_positive_int, False),
        "presentationTimeout": (_positive_duration, False),
        "gcInterval": (_positive_duration, False),
    },
    "dashAndHlsIngest": {
        "useInPlaceWriters": (_bool, False),
        "maxFileBytes": (_positive_int, False),
    },
    "genericServe": {
        "refAppName": (_nonempty_str, True),
        "defaultContentType": (_nonempty_str, False),
        "sendfileMode": (_one_of("off", "xSendfile", "xAccelRedirect"), False),
    },
}
FUNCTION_OPTIONS: dict[str, Schema] = {
    "copy": {"volumeRef": (_nonempty_str, True)},
    "manifest": {"volumeRef": (_nonempty_str, False)},
    "cloudEvent": {
        "url": (_nonempty_str, True),
        "source": (_nonempty_str, False),
        "timeout": (_positive_duration, False),
    },
    "cleanup": {
        "patterns": (_glob_list, True),
        "maxAge": (_duration, True),
        "volumeRefs": (_str_list, False),
        "idleInterval": (_positive_duration, False),
    },
}
# how many entries of volumeRefs each app type takes: (min, max)
APP_VOLUME_ARITY = {"cmafIngest": (1, 1), "dashAndHlsIngest": (1, 1), "genericServe": (1, None)}


def _check_options(options: dict[str, Any], schema: Schema, path: str) -> list[Violation]:
    out = []
    for k in sorted(set(options) - set(schema)):
        out.append(Violation(f"{path}.{k}", "unknown option"))
    for k, (check, required) in schema.items():
        if k not in options:
            if required:
                out.append(Violation(f"{path}.{k}", "required option missing"))
            continue
        err = check(options[k])
        if err:
            out.append(Violation(f"{path}.{k}", err))
    return out


def _check_names(items: list, path: str, category: str) -> list[Violation]:
    out = []
    seen: dict[str, str] = {}
    for p, item in items:
        if not item.name:
            out.append(Violation(f"{p}.name", f"{category} name must not be empty"))
        elif item.name in seen:
            out.append(Violation(f"{p}.name", f"duplicate {category} name {item.name!r} (first at {seen[item.name]})"))
        else:
            seen[item.name] = p
    return out


def validate_config(cfg: Config) -> list[Violation]:
    out: list[Violation] = []
    if cfg.apiVersion != API_VERSION:
        out.append(Violation("$.apiVersion", f"must be {API_VERSION}"))
    if cfg.kind != KIND:
        out.append(Violation("$.kind", f"must be {KIND}"))

    servers = [(f"$.servers[{i}]", s) for i, s in enumerate(cfg.servers)]
    apps = [(f"{p}.apps[{j}]", a) for p, s in servers for j, a in enumerate(s.apps)]
    functions = [(f"{p}.functions[{k}]", f) for p, a in apps for k, f in enumerate(a.functions)]
    volumes = [(f"$.volumes[{i}]", v) for i, v in enumerate(cfg.volumes)]
    out += _check_names(servers, "$.servers", "server")
    out += _check_names(apps, "apps", "app")
    out += _check_names(functions, "functions", "function")
    out += _check_names(volumes, "$.volumes", "volume")
    volume_names = {v.name for v in cfg.volumes}
    app_names = {a.name: a for _, a in apps}

    def ref(path: str, name: Any) -> None:
        if isinstance(name, str) and name and name not in volume_names:
            out.append(Violation(path, f"unresolved volume reference {name!r}"))

    for p, v in volumes:
        if v.type not in VOLUME_TYPES:
            out.append(Violation(f"{p}.type", f"unknown volume type {v.type!r}"))
        else:
            out += _check_options(v.options, VOLUME_OPTIONS[v.type], f"{p}.options")

    for p, s in servers:
        if s.type not in SERVER_TYPES:
            out.append(Violation(f"{p}.type", f"unknown server type {s.type!r}"))
        else:
            out += _check_options(s.options, SERVER_OPTIONS[s.type], f"{p}.options")
        try:
            parse_address(s.address)
        except ValueError as e:
            out.append(Violation(f"{p}.address", str(e)))

    for p, a in apps:
        if not a.mountPath.startswith("/"):
            out.append(Violation(f"{p}.mountPath", "must begin with '/'"))
        try:
            compile_glob(a.hostPattern, ".", True)
        except GlobError as e:
            out.append(Violation(f"{p}.hostPattern", str(e)))
        if a.cors is not None and a.cors.maxAge is not None and _duration(a.cors.maxAge):
            out.append(Violation(f"{p}.cors.maxAge", _duration(a.cors.maxAge)))
        for i, name in enumerate(a.volumeRefs):
            ref(f"{p}.volumeRefs[{i}]", name)
        if a.type not in APP_TYPES:
            out.append(Violation(f"{p}.type", f"unknown app type {a.type!r}"))
        else:
            out += _check_options(a.appOptions, APP_OPTIONS[a.type], f"{p}.appOptions")
            lo, hi = APP_VOLUME_ARITY[a.type]
            n = len(a.volumeRefs)
            if n < lo or (hi is not None and n > hi):
                want = f"exactly {lo}" if lo == hi else f"at least {lo}"
                out.append(Violation(f"{p}.volumeRefs", f"{a.type} needs {want} volume reference(s), got {n}"))
            if a.type == "genericServe":
                target = a.appOptions.get("refAppName")
                if isinstance(target, str) and target and target not in app_names:
                    out.append(Violation(f"{p}.appOptions.refAppName", f"unresolved app reference {target!r}"))
        for k, f in enumerate(a.functions):
            fp = f"{p}.functions[{k}]"
            if f.type not in FUNCTION_TYPES:
                out.append(Violation(f"{fp}.type", f"unknown function type {f.type!r}"))
                continue
            out += _check_options(f.options, FUNCTION_OPTIONS[f.type], f"{fp}.options")
            if "volumeRef" in f.options:
                ref(f"{fp}.options.volumeRef", f.options["volumeRef"])
            if isinstance(f.options.get("volumeRefs"), list):
                for i, name in enumerate(f.options["volumeRefs"]):
                    ref(f"{fp}.options.volumeRefs[{i}]", name)
    return out
