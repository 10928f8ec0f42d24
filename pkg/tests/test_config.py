import pytest

from spaceform_dirichlet.config import ProblemConfig, load_config, normalize
from spaceform_dirichlet.errors import DomainError, HemisphereError

TEXT = """
# comment line
[problem]
model = -1
curvature = sigma(1)/2
psi = 1.5   # inline comment

[domain]
center = 0.6, 0, 0.8
radius = pi/6
n_r = 9
n_theta = 16

[data]
boundary = 1.5

[homotopy]
path = main
epsilon = 0.1
T_exponent = none

[output]
mesh = out.obj
"""


def test_parse_values():
    cfg = ProblemConfig.parse(TEXT)
    assert cfg.model == -1 and cfg.psi == "1.5"
    assert cfg.center == (0.6, 0.0, 0.8)
    assert cfg.radius == pytest.approx(0.5235987755982988)
    assert (cfg.n_r, cfg.n_theta, cfg.path, cfg.epsilon, cfg.T_exponent) == (9, 16, "main", 0.1, None)
    assert cfg.subsolution_text == "1.5" and cfg.outputs == {"mesh": "out.obj"}
    cfg.validate()


def test_round_trip():
    cfg = ProblemConfig.parse(TEXT)
    text = cfg.serialize()
    assert ProblemConfig.parse(text) == cfg
    assert normalize(TEXT) == text
    assert normalize(text) == text


@pytest.mark.parametrize("name", ["sphere_k0", "cap_k1", "geodesic_sphere_k-1"])
def test_shipped_configs_load(name):
    cfg = load_config(f"configs/{name}.ini")
    assert normalize(cfg.serialize()) == cfg.serialize()
    assert cfg.exact is not None


@pytest.mark.parametrize(
    "patch,msg",
    [
        (("[problem]", "[problem]\nextra = 1"), "unknown keys"),
        (("[output]", "[outputs]"), "unknown config sections"),
        (("model = -1", "model = 2"), "curvature_sign"),
        (("model = -1", "model = 0.5"), "integer"),
        (("n_r = 9", "n_r = 2"), "n_r"),
        (("psi = 1.5", "psi = __import__('os')"), "unknown function"),
        (("boundary = 1.5", "boundary = 0.5"), "out of range"),
        (("path = main", "path = 68"), "path"),
        (("center = 0.6, 0, 0.8", "center = 1 2"), "three"),
        (("curvature = sigma(1)/2", "curvature = sigma(3)"), None),
    ],
)
def test_validation_errors(patch, msg):
    text = TEXT.replace(*patch)
    with pytest.raises(DomainError, match=msg):
        ProblemConfig.parse(text).validate()


def test_missing_key_and_hemisphere():
    with pytest.raises(DomainError, match="missing"):
        ProblemConfig.parse(TEXT.replace("psi = 1.5   # inline comment", ""))
    with pytest.raises(HemisphereError):
        load_config("configs/bad_hemisphere.ini")
