import pytest
from hypothesis import given
from hypothesis import strategies as st

from crossmap.errors import ParseError, ValidationError
from crossmap.report import ExperimentReport, parse_csv, read_report, render_report, to_csv, to_markdown


def exp1_row(**kw):
    row = dict(dataset="d", direction="x_to_y", model="lin", loss="mse", measure="cosine", k=10,
               mnno_x_fx=0.6, mnno_y_fx=0.3, mnno_x_y=0.2, p_value=0.008, p_adjusted=0.016, significant=True,
               comparison="per-fold", n_folds=5, learning_rate=0.001, epochs=12, status="ok")
    row.update(kw)
    return row


def test_single_row_csv():
    text = to_csv(ExperimentReport("exp1", [exp1_row()]))
    lines = text.splitlines()
    assert len(lines) == 2
    assert lines[0].startswith("dataset,direction,model,loss")
    assert ",true," in lines[1]


def test_markdown_bolds_larger_column():
    md = to_markdown(ExperimentReport("exp1", [exp1_row(), exp1_row(mnno_x_fx=0.1, significant=False)]))
    rows = md.splitlines()[2:]
    assert "**0.600***" in rows[0] and "**0.300**" not in rows[0]
    assert "**0.300**" in rows[1] and "**0.100**" not in rows[1]


def test_failed_row():
    rep = ExperimentReport("exp1", [exp1_row(mnno_x_fx=None, mnno_y_fx=None, p_value=None, p_adjusted=None,
                                             significant=False, status="FAILED")])
    assert "FAILED" in to_markdown(rep)
    assert parse_csv(to_csv(rep)) == rep


def test_empty_report():
    with pytest.raises(ValidationError):
        to_csv(ExperimentReport("exp1", []))
    with pytest.raises(ValidationError):
        to_markdown(ExperimentReport("exp2", []))


def test_unknown_column():
    with pytest.raises(ValidationError):
        ExperimentReport("exp1", [exp1_row(color="red")])


def test_nul_rejected():
    with pytest.raises(ValidationError):
        ExperimentReport("exp1", [exp1_row(dataset="a\x00b")])
    with pytest.raises(ValidationError):
        ExperimentReport("exp1", [exp1_row(dataset="a\rb")])


def test_bad_csv():
    with pytest.raises(ParseError):
        parse_csv("a,b\n1,2\n")


def test_render_and_read(tmp_path):
    rep = ExperimentReport("exp2", [dict(embedding="e", benchmark="b", measure="cosine", variant="raw",
                                         spearman=0.5, spearman_std=0.0, coverage=1.0, runs=1)])
    render_report(rep, tmp_path / "r.csv")
    assert read_report(tmp_path / "r.csv") == rep
    render_report(rep, tmp_path / "r.md", "markdown")
    assert "**0.500**" in (tmp_path / "r.md").read_text()


finite = st.floats(allow_nan=False, allow_infinity=False)
opt_float = st.one_of(st.none(), finite)


@given(st.lists(st.fixed_dictionaries({
    "dataset": st.text(min_size=1, alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\x00\r")),
    "model": st.sampled_from(["lin", "nn-1"]),
    "k": st.integers(1, 100),
    "mnno_x_fx": opt_float,
    "mnno_y_fx": opt_float,
    "p_value": opt_float,
    "significant": st.booleans(),
}), min_size=1, max_size=5))
def test_csv_round_trip(rows):
    rep = ExperimentReport("exp1", rows)
    assert parse_csv(to_csv(rep)) == rep
