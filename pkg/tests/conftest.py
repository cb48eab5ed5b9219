import pytest

from crisisnet.data_model import Country, MacroNet, TradeLink, build_network
from crisisnet.synthetic import scale_free_trade_network

M2_COUNTRIES_CSV = """code,name,continent,gdp_musd,cab_musd
A,Alpha,X1,100,
B,Beta,X1,10,
D,Delta,X1,20,
E,Epsilon,X2,1000,
F,Phi,X1,5,
"""

M2_TRADES_CSV = """exporter,importer,volume_musd
A,B,2.0
A,D,1.6
B,D,1.5
A,E,50
E,A,60
D,F,1.0
"""


def m2_network(cab=None) -> MacroNet:
    caps = [("A", 100, "X1"), ("B", 10, "X1"), ("D", 20, "X1"), ("E", 1000, "X2"), ("F", 5, "X1")]
    countries = [Country(c, c, cont, float(g), cab) for c, g, cont in caps]
    links = [
        TradeLink("A", "B", 2.0),
        TradeLink("A", "D", 1.6),
        TradeLink("B", "D", 1.5),
        TradeLink("A", "E", 50.0),
        TradeLink("E", "A", 60.0),
        TradeLink("D", "F", 1.0),
    ]
    return build_network(countries, links)


@pytest.fixture
def m2() -> MacroNet:
    return m2_network()


@pytest.fixture
def m2_files(tmp_path):
    c = tmp_path / "countries.csv"
    t = tmp_path / "trades.csv"
    c.write_text(M2_COUNTRIES_CSV)
    t.write_text(M2_TRADES_CSV)
    return c, t


@pytest.fixture(scope="session")
def s1() -> MacroNet:
    return scale_free_trade_network(200, seed=0)


@pytest.fixture(scope="session")
def s1_blocks() -> MacroNet:
    return scale_free_trade_network(200, blocks=4, intra_volume_share=0.8, seed=0)


# -- acceptance reporting ----------------------------------------------------

_ACCEPTANCE: dict = {}


@pytest.fixture
def criterion():
    def record(number, passed, detail=""):
        _ACCEPTANCE[number] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}")
