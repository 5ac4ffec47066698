import io
import json
import subprocess
import sys

import pytest

from sheafctx import fixture_path
from sheafctx.cli import main
from sheafctx.documents import (
    canonical_dumps, dump_model, load_json, net_to_dict, parse_correlations, parse_model, parse_net,
)


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main([str(a) for a in argv], out=out, err=err)
    return code, out.getvalue(), err.getvalue()


def fx(name):
    return str(fixture_path(name))


@pytest.mark.parametrize("argv, code", [
    (("scenario", "validate", fx("prbox.model")), 0),
    (("model", "check-nosig", fx("prbox.model")), 0),
    (("model", "check-nosig", fx("product.model")), 0),
    (("model", "check-nosig", fx("signalling.model")), 1),
    (("model", "check-nosig", fx("singlet_chsh.model")), 0),
    (("model", "find-local", fx("prbox.model")), 1),
    (("model", "find-local", fx("product.model")), 0),
    (("model", "find-local", fx("singlet_chsh.model")), 1),
    (("model", "bell", fx("bell120.corr"), "--pairs", "a,b,c"), 1),
    (("model", "bell", fx("product.model"), "--pairs", "a0,b0,a1"), 2),
    (("quantum", "singlet"), 1),
    (("quantum", "singlet", "--state", "mixed"), 0),
    (("quantum", "singlet", "--angles", "0,0,0,0"), 0),
    (("quantum", "chsh-scan"), 0),
    (("aqft", "check", fx("net2.net")), 0),
    (("aqft", "check", fx("net4.net")), 0),
    (("aqft", "sheaf", fx("net2.net")), 0),
    (("aqft", "sheaf", fx("net4.net"), "--local-model"), 0),
    (("scenario", "validate", fx("bad_antichain.model")), 2),
])
def test_exit_codes(argv, code):
    assert run(*argv)[0] == code


def test_usage_errors_exit_2():
    assert run()[0] == 2
    assert run("model", "teleport", fx("prbox.model"))[0] == 2
    assert run("quantum", "singlet", "--angles", "0,90")[0] == 2
    assert run("model", "check-nosig", "/nonexistent/file.model")[0] == 2


def test_signalling_witness_names_the_measurement():
    code, out, _ = run("model", "check-nosig", fx("signalling.model"), "--format", "json")
    report = json.loads(out)
    assert code == 1 and report["no_signalling"] is False
    assert "a0" in report["witness"]["section"] and report["witness"]["left"] != report["witness"]["right"]


def test_find_local_certificate_in_json():
    code, out, _ = run("model", "find-local", fx("prbox.model"), "--format", "json")
    report = json.loads(out)
    assert code == 1 and report["local_model"] == "infeasible" and report["certificate"]


def test_bell_report():
    code, out, _ = run("--format", "json", "model", "bell", fx("bell120.corr"), "--pairs", "a,b,c")
    report = json.loads(out)
    assert (report["lhs"], report["rhs"], report["inequality_holds"]) == ("1/1", "1/2", False)
    assert report["correlation_lp"] == "infeasible"


def test_chsh_scan_reports_tsirelson():
    _, out, _ = run("quantum", "chsh-scan", "--format", "json")
    report = json.loads(out)
    assert abs(report["value"] - 2 * 2 ** 0.5) < 1e-9 and report["tsirelson_bound_holds"]


def test_format_env_and_precedence(monkeypatch):
    monkeypatch.setenv("SHEAFCTX_FORMAT", "json")
    code, out, _ = run("model", "check-nosig", fx("prbox.model"))
    assert code == 0 and json.loads(out)["no_signalling"] is True
    code, out, _ = run("model", "check-nosig", fx("prbox.model"), "--format", "text")
    assert "no-signalling: true" in out
    monkeypatch.setenv("SHEAFCTX_FORMAT", "yaml")
    code, _, err = run("model", "check-nosig", fx("prbox.model"))
    assert code == 2 and "SHEAFCTX_FORMAT" in err


def test_json_output_is_canonical():
    _, out, _ = run("aqft", "check", fx("net2.net"), "--format", "json")
    assert out == canonical_dumps(json.loads(out))


@pytest.mark.parametrize("name", ["prbox.model", "product.model", "signalling.model", "singlet_chsh.model"])
def test_model_round_trip_is_byte_identical(name):
    text = fixture_path(name).read_text(encoding="utf-8")
    assert dump_model(parse_model(text)) == text


@pytest.mark.parametrize("name", ["net2.net", "net4.net"])
def test_net_round_trip_is_byte_identical(name):
    text = fixture_path(name).read_text(encoding="utf-8")
    assert canonical_dumps(net_to_dict(parse_net(text))) == text


def test_correlation_fixture_is_canonical():
    text = fixture_path("bell120.corr").read_text(encoding="utf-8")
    doc = parse_correlations(text)
    assert doc.variant == "same" and canonical_dumps(load_json(text)) == text


def _mutate(name, edit):
    raw = load_json(fixture_path(name).read_text(encoding="utf-8"))
    edit(raw)
    return canonical_dumps(raw)


@pytest.mark.parametrize("name, edit, field", [
    ("prbox.model", lambda d: d["model"]["a0,b0"].update({"0,0": "x/2"}), "model"),
    ("prbox.model", lambda d: d["scenario"].pop("outcomes"), "scenario"),
    ("prbox.model", lambda d: d["metadata"].update({"carrier": "tropical"}), "metadata.carrier"),
    ("net2.net", lambda d: d["regions"][0].update({"apex": ["1/1", "1/1"]}), "regions"),
])
def test_malformed_documents_report_field(tmp_path, name, edit, field):
    path = tmp_path / name
    path.write_text(_mutate(name, edit), encoding="utf-8")
    cmd = ("aqft", "check") if name.endswith(".net") else ("model", "check-nosig")
    code, out, err = run(*cmd, path)
    assert code == 2 and out == ""
    assert err.startswith("error: ") and f"field {field}" in err


def test_malformed_json_reports_line(tmp_path):
    path = tmp_path / "broken.model"
    path.write_text('{\n  "scenario": {\n    "cover": [\n  }\n', encoding="utf-8")
    code, _, err = run("model", "check-nosig", path)
    assert code == 2 and "line " in err


def test_bad_antichain_reports_line_and_field():
    code, _, err = run("scenario", "validate", fx("bad_antichain.model"))
    assert code == 2 and "line 8, field scenario.cover" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sheafctx", "model", "check-nosig", fx("product.model")],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "no-signalling: true" in proc.stdout
