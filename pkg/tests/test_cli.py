import pytest

from fracturelab.cli import main
from fracturelab.errors import ConfigError

BASE = """
[domain]
rect = 0 0 1 1
dirichlet = left right

[grid]
n = 32

[integrand]
kind = laplace

[datum]
kind = linear_x

[run]
toughness = 1.0
seed = 0
out = {out}
"""


def write_cfg(tmp_path, extra="", base=None, name="exp.ini"):
    out = tmp_path / "out"
    text = (base or BASE).format(out=out) + extra
    path = tmp_path / name
    path.write_text(text)
    return str(path), str(out)


def read(path):
    with open(path, "rb") as f:
        return f.read()


def test_solve_writes_field_and_stress(tmp_path, capsys):
    cfg, out = write_cfg(tmp_path)
    assert main(["solve", "--config", cfg]) == 0
    assert "solve: bulk=1" in capsys.readouterr().out
    field = (tmp_path / "out" / "field.csv").read_text().splitlines()
    assert field[0] == "i,j,side,u"
    assert field[-1].startswith("# version=")
    stress = (tmp_path / "out" / "stress.csv").read_text().splitlines()
    assert stress[0] == "cell_i,cell_j,sx,sy"


def test_missing_p_is_config_error_exit_2(tmp_path, capsys):
    cfg, _ = write_cfg(tmp_path)
    text = open(cfg).read().replace("kind = laplace", "kind = ppower")
    open(cfg, "w").write(text)
    rc = main(["solve", "--config", cfg])
    assert rc == 2
    err = capsys.readouterr().err
    assert "integrand" in err and ".p" in err


def test_config_error_naming_field():
    with pytest.raises(ConfigError) as ei:
        raise ConfigError("missing required option", "integrand", "p")
    assert "[integrand.p]" in str(ei.value)


def test_release_curve_and_classify_outputs(tmp_path):
    extra = """
[family]
kind = segments
stride = 32
lengths = 2 4
orientations = v

[release_curve]
l_max = 0.13
levels = 3

[classify]
probes = 0.5 0.5 ; 0.4 0.6
"""
    cfg, out = write_cfg(tmp_path, extra)
    text = open(cfg).read().replace("n = 32", "n = 128")
    open(cfg, "w").write(text)
    assert main(["release-curve", "--config", cfg]) == 0
    assert main(["classify", "--config", cfg]) == 0
    curve = (tmp_path / "out" / "curve.csv").read_text().splitlines()
    assert curve[0] == "l,W,rate,argmin_id,total_energy"
    assert len(curve) == 5  # header + 3 budgets + meta
    sing = (tmp_path / "out" / "singularity.csv").read_text().splitlines()
    assert sing[0] == "x,y,alpha,C,class,delta"
    assert len(sing) == 4
    assert "weak" in sing[1] and "weak" in sing[2]
    assert (tmp_path / "out" / "rates.svg").exists()


def test_evolve_deterministic_across_workers(tmp_path):
    extra = """
[family]
kind = segments+boundary_debond
stride = 16
lengths = 8
spans = 16

[evolve]
horizon = 1.5
steps = 40
k = 1.0
"""
    cfg, out = write_cfg(tmp_path, extra)
    assert main(["evolve", "--config", cfg, "--out", str(tmp_path / "w1"),
                 "--workers", "1"]) == 0
    assert main(["evolve", "--config", cfg, "--out", str(tmp_path / "w3"),
                 "--workers", "3"]) == 0
    a = read(tmp_path / "w1" / "trajectory.csv")
    b = read(tmp_path / "w3" / "trajectory.csv")
    assert a == b
    assert (tmp_path / "w1" / "h1.svg").exists()


def test_dual_bound_subcommand(tmp_path):
    extra = """
[dual_bound]
m = 1
anchor = 0.5 0.40625
orientation = v
lengths = 4 8
"""
    cfg, out = write_cfg(tmp_path, extra)
    text = open(cfg).read().replace("n = 32", "n = 64")
    open(cfg, "w").write(text)
    assert main(["dual-bound", "--config", cfg]) == 0
    rows = (tmp_path / "out" / "bound_report.csv").read_text().splitlines()
    assert rows[0] == "crack_id,h1,bound,release_measured,ratio,alpha_fit"
    for line in rows[1:3]:
        vals = line.split(",")
        assert float(vals[3]) <= float(vals[2]) + 1e-10  # release <= bound


def test_poincare_subcommand(tmp_path):
    extra = """
[poincare]
case = ii
L = 1.0
M = 2.0
samples = 3
resolution = 24
"""
    cfg, out = write_cfg(tmp_path, extra)
    assert main(["poincare", "--config", cfg]) == 0
    rows = (tmp_path / "out" / "poincare.csv").read_text().splitlines()
    assert rows[0] == "case,L,M,profile_id,C,resolution"
    assert len(rows) == 5


def test_crack_file_error_exit_3(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("0.01 0 0.04 0\n")
    cfg, _ = write_cfg(tmp_path, f"\n[dual_bound]\nm = 1\ncrack_file = {bad}\n")
    rc = main(["dual-bound", "--config", cfg])
    assert rc == 3


def test_seeded_reruns_are_byte_identical(tmp_path):
    extra = """
[poincare]
case = ii
L = 1.0
M = 2.0
samples = 3
resolution = 24
"""
    cfg, out = write_cfg(tmp_path, extra)
    assert main(["poincare", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["poincare", "--config", cfg, "--out", str(tmp_path / "b"),
                 "--workers", "2"]) == 0
    assert read(tmp_path / "a" / "poincare.csv") == read(tmp_path / "b" / "poincare.csv")
