import pytest

from virtobj import materials
from virtobj.materials import MaterialError, OverrideParseError, lookup, parse_overrides


def test_ceramic_defaults():
    m = lookup("ceramic")
    assert m.youngs_modulus > 0
    assert 0 < m.poisson_ratio < 0.5


def test_all_defaults_valid():
    for name in materials.DEFAULTS:
        lookup(name).validate()


def test_unknown_material():
    with pytest.raises(MaterialError, match="unobtainium"):
        lookup("unobtainium")


def test_override_shadows_one_field(tmp_path):
    p = tmp_path / "ov.cfg"
    p.write_text("# stiffer wood\nwood.youngs_modulus = 2.2e10\n")
    ov = materials.load_overrides(p)
    w = lookup("wood", ov)
    base = lookup("wood")
    assert w.youngs_modulus == 2.2e10
    assert (w.density, w.poisson_ratio, w.rayleigh_alpha, w.rayleigh_beta) == (
        base.density, base.poisson_ratio, base.rayleigh_alpha, base.rayleigh_beta)


def test_override_defines_new_material():
    text = "\n".join(f"foam.{f} = {v}" for f, v in
                     zip(materials.FIELDS, ("30", "1e6", "0.3", "100", "1e-5")))
    m = lookup("foam", parse_overrides(text))
    assert m.density == 30.0


def test_new_material_needs_all_fields():
    with pytest.raises(MaterialError):
        lookup("foam", parse_overrides("foam.density = 30"))


@pytest.mark.parametrize("text, line", [
    ("wood.density = 700\nwood.density\n", 2),
    ("wood.colour = 3\n", 1),
    ("\n\nwood.density = heavy\n", 3),
])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(OverrideParseError) as err:
        parse_overrides(text, "ov.cfg")
    assert err.value.line == line


def test_override_must_keep_invariants():
    with pytest.raises(MaterialError):
        lookup("glass", parse_overrides("glass.poisson_ratio = 0.5"))


def test_lookup_referentially_transparent():
    ov = parse_overrides("iron.density = 7000")
    assert lookup("iron", ov) == lookup("iron", ov)
