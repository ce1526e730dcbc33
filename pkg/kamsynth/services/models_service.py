"""
Model catalog: built-in systems for the chain, module, translation and tank examples.
"""

from fractions import Fraction
from typing import Any, Callable, Dict, List, Mapping, Optional, Set, Tuple

from ..core.errors import BadParams, UnknownModel
from ..core.logging import get_logger
from ..domains.geo import GeoRegion, GeoSystem
from ..domains.indexed import ALL, EVEN, ODD, EdgeTemplate, IndexedSystem, IndexSet, TagSpace
from ..domains.interval import TankParams, TankSystem
from .systems_service import FiniteSystem, build_system

logger = get_logger(__name__)

ClassOracle = Callable[[int], str]

TRANSLATION_WIDTH = Fraction(3)
TRANSLATION_STEP = Fraction(2, 5)


def thue_morse(i: int) -> str:
    """Class I where the binary expansion of i has an even number of ones."""
    return "I" if bin(i).count("1") % 2 == 0 else "II"


def all_one(i: int) -> str:
    return "I"


def alternating(i: int) -> str:
    """Alternates classes between consecutive modules of the same type."""
    return "I" if ((i + 1) // 2) % 2 == 1 else "II"


ORACLES: Dict[str, ClassOracle] = {
    "thue_morse": thue_morse,
    "all_one": all_one,
    "alternating": alternating,
}


def _check_params(name: str, params: Mapping[str, Any], allowed: Set[str]) -> None:
    unknown = sorted(set(params) - allowed)
    if unknown:
        raise BadParams(f"unknown parameters for {name}: {', '.join(unknown)}", {"allowed": sorted(allowed)})


def _size(params: Mapping[str, Any]) -> Optional[int]:
    if params.get("N") is None:
        return None
    try:
        n = int(params["N"])
    except (TypeError, ValueError):
        raise BadParams("N must be an integer", {"N": params["N"]})
    if n < 1:
        raise BadParams("N must be at least 1", {"N": n})
    return n


def fig3_chain_symbolic() -> IndexedSystem:
    """a1 -> b1; b_i -> b_{i-1}, b_{i+1}, a2; a2 -> a2. X0 = {a1, a2}."""
    space = TagSpace(
        tags=("a", "b"),
        validity={"a": IndexSet.finite([1, 2]), "b": ALL},
        output={"a": "A", "b": "B"},
    )
    edges = [
        EdgeTemplate("a", "u", "b", const=1, when=IndexSet.finite([1])),
        EdgeTemplate("a", "u", "a", when=IndexSet.finite([2])),
        EdgeTemplate("b", "u", "b", shift=1),
        EdgeTemplate("b", "u", "b", shift=-1),
        EdgeTemplate("b", "u", "a", const=2),
    ]
    return IndexedSystem("fig3_chain", space, ["u"], ["A", "B"], edges, {"a": IndexSet.finite([1, 2])})


def fig3_chain_finite(n: int) -> FiniteSystem:
    """Truncation at b_n; b_n keeps its edges to b_{n-1} and a2."""
    states = ["a1", "a2"] + [f"b{i}" for i in range(1, n + 1)]
    outputs = {x: ("A" if x.startswith("a") else "B") for x in states}
    transitions: Dict[Tuple[str, str], List[str]] = {("a1", "u"): ["b1"], ("a2", "u"): ["a2"]}
    for i in range(1, n + 1):
        targets = ["a2"]
        if i > 1:
            targets.append(f"b{i - 1}")
        if i < n:
            targets.append(f"b{i + 1}")
        transitions[(f"b{i}", "u")] = targets
    return build_system(states, ["a1", "a2"], ["u"], ["A", "B"], outputs, transitions, name=f"fig3_chain(N={n})")


FIG4_OUTPUTS = ["A", "B", "C", "D", "E", "F", "G"]


def fig4_modules_symbolic() -> IndexedSystem:
    """
    Chain b_i with modules hanging off c_i: D-type at odd i, E-type at even i.

    Tags d, dl, dr (and e, el, er) form one validity group each. Under the validity
    interpretation a group is only ever handled as a whole, so the class oracle never
    needs to be evaluated.
    """
    tags = ("a", "b", "c", "d", "dl", "dr", "e", "el", "er", "f", "g")
    validity = {
        "a": IndexSet.finite([1]),
        "b": ALL,
        "c": ALL,
        "d": ODD,
        "dl": ODD,
        "dr": ODD,
        "e": EVEN,
        "el": EVEN,
        "er": EVEN,
        "f": ALL,
        "g": ALL,
    }
    output = {t: t[0].upper() for t in tags}
    space = TagSpace(
        tags=tags,
        validity=validity,
        output=output,
        groups=(frozenset({"d", "dl", "dr"}), frozenset({"e", "el", "er"})),
    )
    edges = [
        EdgeTemplate("a", "u", "b"),
        EdgeTemplate("b", "u", "b", shift=1),
        EdgeTemplate("b", "u", "b", shift=-1),
        EdgeTemplate("b", "u", "c"),
    ]
    for layer in ("d", "e"):
        edges += [
            EdgeTemplate("c", "u", layer),
            EdgeTemplate("c", "u", f"{layer}l"),
            EdgeTemplate("c", "u", f"{layer}r"),
            EdgeTemplate(layer, "u", "f"),
            EdgeTemplate(layer, "u", "g"),
            EdgeTemplate(f"{layer}l", "u", "f"),
            EdgeTemplate(f"{layer}r", "u", "g"),
        ]
    edges += [EdgeTemplate("f", "u", "f"), EdgeTemplate("g", "u", "g")]
    return IndexedSystem("fig4_modules", space, ["u"], FIG4_OUTPUTS, edges, {"a": IndexSet.finite([1])})


def fig4_modules_finite(n: int, oracle: ClassOracle) -> FiniteSystem:
    """Truncation with n modules; the oracle picks class I (one middle state) or II (two)."""
    states = ["a1"]
    outputs = {"a1": "A"}
    transitions: Dict[Tuple[str, str], List[str]] = {("a1", "u"): ["b1"]}
    for i in range(1, n + 1):
        layer = "d" if i % 2 == 1 else "e"
        kind = oracle(i)
        if kind not in ("I", "II"):
            raise BadParams("class oracle must return 'I' or 'II'", {"index": i, "value": kind})
        b, c, f, g = f"b{i}", f"c{i}", f"f{i}", f"g{i}"
        states += [b, c]
        outputs.update({b: "B", c: "C", f: "F", g: "G"})
        transitions[(b, "u")] = [x for x in (f"b{i - 1}" if i > 1 else None, f"b{i + 1}" if i < n else None, c) if x]
        if kind == "I":
            middle = f"{layer}{i}"
            states.append(middle)
            outputs[middle] = layer.upper()
            transitions[(c, "u")] = [middle]
            transitions[(middle, "u")] = [f, g]
        else:
            left, right = f"{layer}l{i}", f"{layer}r{i}"
            states += [left, right]
            outputs.update({left: layer.upper(), right: layer.upper()})
            transitions[(c, "u")] = [left, right]
            transitions[(left, "u")] = [f]
            transitions[(right, "u")] = [g]
        states += [f, g]
        transitions[(f, "u")] = [f]
        transitions[(g, "u")] = [g]
    return build_system(states, ["a1"], ["u"], FIG4_OUTPUTS, outputs, transitions, name=f"fig4_modules(N={n})")


def _unit_box(i: int, j: int, d: Optional[Tuple] = None) -> GeoRegion:
    return GeoRegion.box(TRANSLATION_WIDTH, (i, i + 1), (j, j + 1), d)


def _translation_modes() -> Dict[str, Tuple[Fraction, Fraction]]:
    return {"u1": (TRANSLATION_STEP, TRANSLATION_STEP), "u2": (-TRANSLATION_STEP, -TRANSLATION_STEP)}


def sigma1() -> GeoSystem:
    """x+ = mod3(x +/- (0.4, 0.4)); output y_ij names the unit box [i, i+1) x [j, j+1)."""
    family = [(f"y{i}{j}", _unit_box(i, j)) for i in range(3) for j in range(3)]
    return GeoSystem("sigma1", TRANSLATION_WIDTH, _translation_modes(), family)


def sigma2() -> GeoSystem:
    """sigma1 with the y22 box split along its diagonal into y22u (x2 > x1) and y22l."""
    family = [(f"y{i}{j}", _unit_box(i, j)) for i in range(3) for j in range(3) if (i, j) != (2, 2)]
    family.append(("y22u", _unit_box(2, 2, (-1, 0))))
    family.append(("y22l", _unit_box(2, 2, (0, 1))))
    return GeoSystem("sigma2", TRANSLATION_WIDTH, _translation_modes(), family)


def tank(params: Mapping[str, Any]) -> TankSystem:
    defaults = TankParams()
    try:
        values = TankParams(
            capacity=Fraction(str(params.get("capacity", defaults.capacity))),
            sensors=int(params.get("sensors", defaults.sensors)),
            inflow=Fraction(str(params.get("inflow", defaults.inflow))),
            outflow=Fraction(str(params.get("outflow", defaults.outflow))),
        )
    except (TypeError, ValueError, ZeroDivisionError) as e:
        raise BadParams(f"invalid tank parameters: {e}")
    if values.sensors < 1 or values.capacity < values.sensors:
        raise BadParams("tank needs 1 <= sensors <= capacity", {"sensors": values.sensors})
    return TankSystem(values)


class ModelsService:
    """Named constructors for the built-in systems."""

    def __init__(self):
        self.catalog: Dict[str, Callable[[Dict[str, Any]], Any]] = {}
        self._initialize_catalog()

    def _initialize_catalog(self) -> None:
        self.catalog = {
            "fig3_chain": self._fig3,
            "fig4_modules": self._fig4,
            "sigma1": self._sigma1,
            "sigma2": self._sigma2,
            "tank": self._tank,
        }
        self.aliases = {"fig3": "fig3_chain", "fig4": "fig4_modules"}
        logger.debug("models_catalog_ready", models=sorted(self.catalog))

    def names(self) -> List[str]:
        return sorted(self.catalog)

    def build(self, name: str, params: Optional[Dict[str, Any]] = None):
        """
        Build a catalog model.

        Args:
            name: Model name or alias (fig3, fig4)
            params: Constructor parameters

        Returns:
            FiniteSystem or SymbolicSystem

        Raises:
            UnknownModel: If the name is not in the catalog
            BadParams: If a parameter is unknown or invalid
        """
        key = self.aliases.get(name, name)
        if key not in self.catalog:
            raise UnknownModel(name)
        system = self.catalog[key](dict(params or {}))
        logger.info("model_built", model=key, system=getattr(system, "name", key))
        return system

    def _fig3(self, params: Dict[str, Any]):
        _check_params("fig3_chain", params, {"N"})
        n = _size(params)
        return fig3_chain_symbolic() if n is None else fig3_chain_finite(n)

    def _fig4(self, params: Dict[str, Any]):
        _check_params("fig4_modules", params, {"N", "oracle"})
        oracle = params.get("oracle", "thue_morse")
        if isinstance(oracle, str):
            if oracle not in ORACLES:
                raise BadParams(f"unknown class oracle: {oracle}", {"known": sorted(ORACLES)})
            oracle = ORACLES[oracle]
        elif not callable(oracle):
            raise BadParams("oracle must be a name or a callable")
        n = _size(params)
        return fig4_modules_symbolic() if n is None else fig4_modules_finite(n, oracle)

    def _sigma1(self, params: Dict[str, Any]):
        _check_params("sigma1", params, set())
        return sigma1()

    def _sigma2(self, params: Dict[str, Any]):
        _check_params("sigma2", params, set())
        return sigma2()

    def _tank(self, params: Dict[str, Any]):
        _check_params("tank", params, {"capacity", "sensors", "inflow", "outflow"})
        return tank(params)


_models_service: Optional[ModelsService] = None


def get_models_service() -> ModelsService:
    """
    Get or create the global models service instance.

    Returns:
        ModelsService: The models service instance
    """
    global _models_service
    if _models_service is None:
        _models_service = ModelsService()
    return _models_service
