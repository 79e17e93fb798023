import json

import pytest

from rsgbm import cli
from rsgbm.errors import ParseError, ValidationError

MODEL = {"Q": [[-1, 1], [1, -1]], "mu": [0.1, -0.1], "sigma": [0.2, 0.2]}


def doc(command, **kw):
    return json.dumps({"command": command, "model": MODEL, **kw})


def test_minimal_config_defaults():
    cfg = cli.parse_config(doc("spectrum"))
    assert cfg.format == "csv" and cfg.output is None
    assert cfg.params["p_grid"] == cli.PARAM_DEFAULTS["spectrum"]["p_grid"]
    assert cfg.model.n_states == 2


def test_errors_are_collected():
    bad = {"Q": [[-1, 1.5], [1, -1]], "mu": [0.1, -0.1], "sigma": [0.2, 0.0], "extra": 1}
    with pytest.raises(ValidationError) as exc:
        cli.parse_config(json.dumps({"command": "spectrum", "model": bad,
                                     "params": {"p_grid": [2, 1], "nope": 0}, "colour": "red"}))
    fields = [f for f, _ in exc.value.errors]
    assert "model.sigma[1]" in fields
    assert "model.Q[0]" in fields and "model.extra" in fields
    assert "params.p_grid" in fields and "params.nope" in fields and "colour" in fields
    msg = dict(exc.value.errors)["model.Q[0]"]
    assert "0.5" in msg


def test_parse_error_location():
    with pytest.raises(ParseError) as exc:
        cli.parse_config('{"command": "classify",\n "model": [1,,2]}')
    assert exc.value.line == 2 and exc.value.column is not None


def test_two_state_commands_need_two_states():
    three = {"Q": [[-2, 1, 1], [1, -2, 1], [1, 1, -2]], "mu": [0, 0, 0], "sigma": [1, 1, 1]}
    with pytest.raises(ValidationError):
        cli.parse_config(json.dumps({"command": "moments", "model": three}))
    with pytest.raises(ValidationError) as exc:
        cli.parse_config(doc("fpp-bounds", params={"a": 2.0}))
    assert {f for f, _ in exc.value.errors} == {"params.T", "params.a"}


def test_classify_output(tmp_path, capsys):
    m = tmp_path / "m.json"
    m.write_text(json.dumps(MODEL))
    assert cli.main(["classify", "--model", str(m)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["recurrence_class"] == "TRANSIENT" and out["as_limit"] == "TO_ZERO"
    assert out["mean_drift"] == pytest.approx(-0.02, abs=1e-15)


def test_spectrum_zero_grid(tmp_path):
    c = tmp_path / "c.json"
    c.write_text(json.dumps({"model": "m.json", "params": {"p_grid": [0]}}))
    (tmp_path / "m.json").write_text(json.dumps(MODEL))
    out = tmp_path / "curve.csv"
    assert cli.main(["spectrum", "--config", str(c), "--output", str(out)]) == 0
    assert out.read_text().splitlines() == ["p,growth_rate,eta_p,max_eig_real,max_eig_imag",
                                            "0,0,0,0,0"]


def test_exit_codes(tmp_path):
    c = tmp_path / "c.json"
    c.write_text(doc("moments", params={"t_grid": [50.0], "max_terms": 3}))
    assert cli.main(["moments", "--config", str(c)]) == cli.EXIT_NUMERICAL
    c.write_text(doc("fpp-bounds", params={"a": 0.5, "T": 1.0}))
    # delta0 > delta1 for this model: rejected, not relabelled
    assert cli.main(["fpp-bounds", "--config", str(c)]) == cli.EXIT_INVALID
    c.write_text("{")
    assert cli.main(["classify", "--config", str(c)]) == cli.EXIT_INVALID


def test_byte_identical_outputs(tmp_path):
    model = {"Q": [[-1, 1], [2, -2]], "mu": [-0.055, 0.145], "sigma": [0.3, 0.3]}
    c = tmp_path / "c.json"
    c.write_text(json.dumps({"model": model, "params": {"a": 0.5, "T": 1.0,
                                                        "mc": {"n_paths": 20000}}}))
    outs = []
    for threads in ("1", "4"):
        o = tmp_path / f"out{threads}.json"
        assert cli.main(["fpp-mc", "--config", str(c), "--output", str(o),
                         "--threads", threads]) == 0
        outs.append(o.read_bytes())
    assert outs[0] == outs[1]
    o = tmp_path / "b.json"
    assert cli.main(["fpp-bounds", "--config", str(c), "--output", str(o)]) != 0  # mc key unknown
    c.write_text(json.dumps({"model": model, "params": {"a": 0.5, "T": 1.0}}))
    assert cli.main(["fpp-bounds", "--config", str(c), "--output", str(o)]) == 0
    res = json.loads(o.read_text())
    assert 0 <= res["lower"] <= res["upper"] <= 1 and res["coefficient_variant"] == "density"


def test_moments_and_slepian(tmp_path, capsys):
    c = tmp_path / "c.json"
    c.write_text(doc("moments", params={"t_grid": [1.0, 2.0]}, format="json"))
    assert cli.main(["moments", "--config", str(c)]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert [r["t"] for r in rows] == [1.0, 2.0]
    sm = {"Q": [[-1, 1], [1, -1]], "mu": [0.0, 0.1], "sigma": [0.4, 0.2]}
    c.write_text(json.dumps({"model": sm, "params": {"a": 0.5, "T": 1.0,
                                                     "mc": {"n_paths": 1000, "refinement": 64}}}))
    assert cli.main(["slepian", "--config", str(c)]) == 0
    est = json.loads(capsys.readouterr().out)
    assert 0 <= est["value"] <= 1 and "bias_estimate" in est
