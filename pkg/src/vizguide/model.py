"""Dashboard specification format: domain types, parsing, serialization.

The on-disk format is a single JSON document (UTF-8). Rectangles are
``{x, y, w, h}`` in CSS-pixel page coordinates with the origin top-left.
Visual order in the document is z-order: later entries render on top.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Mapping

from .errors import DanglingRefError, GeometryError, SchemaError
from .geometry import Rect


class VisualKind(str, Enum):
    KPI = "kpi"
    BAR_CHART = "barChart"
    LINE_CHART = "lineChart"
    FUNNEL_CHART = "funnelChart"
    MAP_CHART = "mapChart"
    SLICER = "slicer"


class ScaleType(str, Enum):
    LINEAR = "linear"
    LOG = "log"
    CATEGORICAL = "categorical"
    TEMPORAL = "temporal"


class LegendPosition(str, Enum):
    TOP = "top"
    BOTTOM = "bottom"
    LEFT = "left"
    RIGHT = "right"
    TOP_RIGHT = "topRight"


class ValueType(str, Enum):
    TEXT = "text"
    NUMBER = "number"
    DATE = "date"
    GEO = "geo"


class ColumnRole(str, Enum):
    KEY = "key"
    DIMENSION = "dimension"
    MEASURE = "measure"


class SelfInteraction(str, Enum):
    HIGHLIGHT_CATEGORY = "highlightCategory"
    COMPARE_CATEGORIES = "compareCategories"
    HOVER = "hover"


class RegionKind(str, Enum):
    VISUAL_BODY = "visualBody"
    AXIS_X = "axisX"
    AXIS_Y = "axisY"
    LEGEND = "legend"
    TITLE = "title"
    DATA_AREA = "dataArea"
    FILTER_CONTROL = "filterControl"


class InsightKind(str, Enum):
    TREND = "trend"
    DRIVER = "driver"
    DESCRIPTIVE = "descriptive"


@dataclass(frozen=True)
class FieldRef:
    table: str
    column: str

    def __str__(self) -> str:
        return f"{self.table}.{self.column}"


@dataclass(frozen=True)
class AxisSpec:
    field: FieldRef
    scale_type: ScaleType
    unit: str = ""
    label: str = ""
    sub_bounds: Rect | None = None


@dataclass(frozen=True)
class LegendSpec:
    field: FieldRef
    position: LegendPosition
    entries: tuple[str, ...]
    sub_bounds: Rect | None = None


@dataclass(frozen=True)
class EncodingSet:
    axis_x: AxisSpec | None = None
    axis_y: AxisSpec | None = None
    legend: LegendSpec | None = None
    category: FieldRef | None = None
    value: FieldRef | None = None

    def field_refs(self) -> list[FieldRef]:
        """All references in slot order (axisX, axisY, legend, category, value)."""
        refs: list[FieldRef] = []
        if self.axis_x:
            refs.append(self.axis_x.field)
        if self.axis_y:
            refs.append(self.axis_y.field)
        if self.legend:
            refs.append(self.legend.field)
        if self.category:
            refs.append(self.category)
        if self.value:
            refs.append(self.value)
        return refs


@dataclass(frozen=True)
class InteractionCaps:
    self_interactions: frozenset[SelfInteraction] = frozenset()
    cross_filter_targets: tuple[str, ...] = ()
    drill_down: bool = False
    drill_hierarchy: tuple[FieldRef, ...] = ()


@dataclass(frozen=True)
class VisualSpec:
    id: str
    kind: VisualKind
    title: str
    bounds: Rect
    encodings: EncodingSet = EncodingSet()
    interactions: InteractionCaps = InteractionCaps()
    description: str = ""
    # Display-only series for the UI renderer. The assistant side treats
    # this as opaque and never reads values out of it.
    sample_data: Any = None
    # RegionKind -> Rect, populated by infer_sub_regions(). Empty until then.
    regions: Mapping[RegionKind, Rect] = field(default_factory=dict)

    def region_rect(self, region: RegionKind) -> Rect | None:
        if region is RegionKind.VISUAL_BODY:
            return self.bounds
        return self.regions.get(region)


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    value_type: ValueType
    role: ColumnRole


@dataclass(frozen=True)
class TableSpec:
    name: str
    columns: tuple[ColumnSpec, ...]

    def column(self, name: str) -> ColumnSpec | None:
        for col in self.columns:
            if col.name == name:
                return col
        return None


@dataclass(frozen=True)
class Relationship:
    from_ref: FieldRef
    to_ref: FieldRef


@dataclass(frozen=True)
class DataModelSpec:
    tables: tuple[TableSpec, ...]
    relationships: tuple[Relationship, ...] = ()

    def table(self, name: str) -> TableSpec | None:
        for tbl in self.tables:
            if tbl.name == name:
                return tbl
        return None

    def resolve(self, ref: FieldRef) -> ColumnSpec | None:
        tbl = self.table(ref.table)
        return tbl.column(ref.column) if tbl else None


@dataclass(frozen=True)
class InsightAnnotation:
    visual_id: str
    kind: InsightKind
    text: str


@dataclass(frozen=True)
class DashboardSpec:
    id: str
    title: str
    description: str
    page_bounds: Rect
    visuals: tuple[VisualSpec, ...]
    data_model: DataModelSpec
    insights: tuple[InsightAnnotation, ...] = ()

    def visual(self, visual_id: str) -> VisualSpec | None:
        for v in self.visuals:
            if v.id == visual_id:
                return v
        return None

    def z_index(self, visual_id: str) -> int:
        """List position; later visuals stack on top."""
        for i, v in enumerate(self.visuals):
            if v.id == visual_id:
                return i
        raise KeyError(visual_id)

    def insights_for(self, visual_id: str) -> tuple[InsightAnnotation, ...]:
        return tuple(a for a in self.insights if a.visual_id == visual_id)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

# Sub-regions a visual kind may expose beyond its body. Kpi cards are a
# single value tile: no strips at all, so a lasso over one can only mean
# the card itself.
KIND_REGIONS: dict[VisualKind, frozenset[RegionKind]] = {
    VisualKind.KPI: frozenset(),
    VisualKind.SLICER: frozenset({RegionKind.TITLE, RegionKind.FILTER_CONTROL}),
    VisualKind.BAR_CHART: frozenset(
        {RegionKind.TITLE, RegionKind.AXIS_X, RegionKind.AXIS_Y, RegionKind.LEGEND, RegionKind.DATA_AREA}
    ),
    VisualKind.LINE_CHART: frozenset(
        {RegionKind.TITLE, RegionKind.AXIS_X, RegionKind.AXIS_Y, RegionKind.LEGEND, RegionKind.DATA_AREA}
    ),
    VisualKind.FUNNEL_CHART: frozenset({RegionKind.TITLE, RegionKind.LEGEND, RegionKind.DATA_AREA}),
    VisualKind.MAP_CHART: frozenset({RegionKind.TITLE, RegionKind.LEGEND, RegionKind.DATA_AREA}),
}


def _expect_dict(value: Any, path: str) -> dict:
    if not isinstance(value, dict):
        raise SchemaError(path, f"expected object, got {type(value).__name__}")
    return value


def _expect_list(value: Any, path: str) -> list:
    if not isinstance(value, list):
        raise SchemaError(path, f"expected array, got {type(value).__name__}")
    return value


def _req(obj: dict, key: str, path: str) -> Any:
    if key not in obj:
        raise SchemaError(f"{path}.{key}", "missing required field")
    return obj[key]


def _req_str(obj: dict, key: str, path: str) -> str:
    value = _req(obj, key, path)
    if not isinstance(value, str):
        raise SchemaError(f"{path}.{key}", f"expected string, got {type(value).__name__}")
    return value


def _opt_str(obj: dict, key: str, path: str, default: str = "") -> str:
    if key not in obj or obj[key] is None:
        return default
    if not isinstance(obj[key], str):
        raise SchemaError(f"{path}.{key}", f"expected string, got {type(obj[key]).__name__}")
    return obj[key]


def _enum(enum_cls: type[Enum], value: Any, path: str) -> Any:
    try:
        return enum_cls(value)
    except ValueError:
        allowed = ", ".join(e.value for e in enum_cls)  # type: ignore[attr-defined]
        raise SchemaError(path, f"expected one of [{allowed}], got {value!r}") from None


def _rect(obj: Any, path: str) -> Rect:
    data = _expect_dict(obj, path)
    for key in ("x", "y", "w", "h"):
        if key not in data:
            raise SchemaError(f"{path}.{key}", "missing required field")
        if not isinstance(data[key], (int, float)) or isinstance(data[key], bool):
            raise SchemaError(f"{path}.{key}", f"expected number, got {type(data[key]).__name__}")
    return Rect.from_dict(data)


def _field_ref(obj: Any, path: str) -> FieldRef:
    data = _expect_dict(obj, path)
    return FieldRef(table=_req_str(data, "table", path), column=_req_str(data, "column", path))


def _axis(obj: Any, path: str) -> AxisSpec:
    data = _expect_dict(obj, path)
    sub = data.get("subBounds")
    return AxisSpec(
        field=_field_ref(_req(data, "field", path), f"{path}.field"),
        scale_type=_enum(ScaleType, _req(data, "scaleType", path), f"{path}.scaleType"),
        unit=_opt_str(data, "unit", path),
        label=_opt_str(data, "label", path),
        sub_bounds=_rect(sub, f"{path}.subBounds") if sub is not None else None,
    )


def _legend(obj: Any, path: str) -> LegendSpec:
    data = _expect_dict(obj, path)
    entries = _expect_list(_req(data, "entries", path), f"{path}.entries")
    if not entries:
        raise SchemaError(f"{path}.entries", "legend entries must be non-empty")
    if not all(isinstance(e, str) for e in entries):
        raise SchemaError(f"{path}.entries", "entries must be strings")
    sub = data.get("subBounds")
    return LegendSpec(
        field=_field_ref(_req(data, "field", path), f"{path}.field"),
        position=_enum(LegendPosition, _req(data, "position", path), f"{path}.position"),
        entries=tuple(entries),
        sub_bounds=_rect(sub, f"{path}.subBounds") if sub is not None else None,
    )


def _encodings(obj: Any, path: str) -> EncodingSet:
    if obj is None:
        return EncodingSet()
    data = _expect_dict(obj, path)
    known = {"axisX", "axisY", "legend", "category", "value"}
    for key in data:
        if key not in known:
            raise SchemaError(f"{path}.{key}", "unknown encoding slot")
    return EncodingSet(
        axis_x=_axis(data["axisX"], f"{path}.axisX") if data.get("axisX") else None,
        axis_y=_axis(data["axisY"], f"{path}.axisY") if data.get("axisY") else None,
        legend=_legend(data["legend"], f"{path}.legend") if data.get("legend") else None,
        category=_field_ref(data["category"], f"{path}.category") if data.get("category") else None,
        value=_field_ref(data["value"], f"{path}.value") if data.get("value") else None,
    )


def _interactions(obj: Any, path: str) -> InteractionCaps:
    if obj is None:
        return InteractionCaps()
    data = _expect_dict(obj, path)
    raw_self = _expect_list(data.get("selfInteractions", []), f"{path}.selfInteractions")
    self_interactions = frozenset(
        _enum(SelfInteraction, s, f"{path}.selfInteractions[{i}]") for i, s in enumerate(raw_self)
    )
    raw_targets = _expect_list(data.get("crossFilterTargets", []), f"{path}.crossFilterTargets")
    if not all(isinstance(t, str) for t in raw_targets):
        raise SchemaError(f"{path}.crossFilterTargets", "targets must be visual id strings")
    drill_down = bool(data.get("drillDown", False))
    raw_hierarchy = _expect_list(data.get("drillHierarchy", []), f"{path}.drillHierarchy")
    hierarchy = tuple(
        _field_ref(h, f"{path}.drillHierarchy[{i}]") for i, h in enumerate(raw_hierarchy)
    )
    return InteractionCaps(
        self_interactions=self_interactions,
        cross_filter_targets=tuple(raw_targets),
        drill_down=drill_down,
        drill_hierarchy=hierarchy,
    )


def _regions(obj: Any, path: str) -> dict[RegionKind, Rect]:
    if obj is None:
        return {}
    data = _expect_dict(obj, path)
    out: dict[RegionKind, Rect] = {}
    for key, value in data.items():
        kind = _enum(RegionKind, key, f"{path}.{key}")
        out[kind] = _rect(value, f"{path}.{key}")
    return out


def _visual(obj: Any, path: str) -> VisualSpec:
    data = _expect_dict(obj, path)
    bounds = _rect(_req(data, "bounds", path), f"{path}.bounds")
    return VisualSpec(
        id=_req_str(data, "id", path),
        kind=_enum(VisualKind, _req(data, "kind", path), f"{path}.kind"),
        title=_req_str(data, "title", path),
        bounds=bounds,
        encodings=_encodings(data.get("encodings"), f"{path}.encodings"),
        interactions=_interactions(data.get("interactions"), f"{path}.interactions"),
        description=_opt_str(data, "description", path),
        sample_data=data.get("sampleData"),
        regions=_regions(data.get("regions"), f"{path}.regions"),
    )


def _data_model(obj: Any, path: str) -> DataModelSpec:
    data = _expect_dict(obj, path)
    tables: list[TableSpec] = []
    for i, raw_table in enumerate(_expect_list(_req(data, "tables", path), f"{path}.tables")):
        tpath = f"{path}.tables[{i}]"
        tdata = _expect_dict(raw_table, tpath)
        columns: list[ColumnSpec] = []
        for j, raw_col in enumerate(_expect_list(_req(tdata, "columns", tpath), f"{tpath}.columns")):
            cpath = f"{tpath}.columns[{j}]"
            cdata = _expect_dict(raw_col, cpath)
            columns.append(
                ColumnSpec(
                    name=_req_str(cdata, "name", cpath),
                    value_type=_enum(ValueType, _req(cdata, "valueType", cpath), f"{cpath}.valueType"),
                    role=_enum(ColumnRole, _req(cdata, "role", cpath), f"{cpath}.role"),
                )
            )
        tables.append(TableSpec(name=_req_str(tdata, "name", tpath), columns=tuple(columns)))
    relationships: list[Relationship] = []
    for i, raw_rel in enumerate(_expect_list(data.get("relationships", []), f"{path}.relationships")):
        rpath = f"{path}.relationships[{i}]"
        rdata = _expect_dict(raw_rel, rpath)
        relationships.append(
            Relationship(
                from_ref=_field_ref(_req(rdata, "from", rpath), f"{rpath}.from"),
                to_ref=_field_ref(_req(rdata, "to", rpath), f"{rpath}.to"),
            )
        )
    return DataModelSpec(tables=tuple(tables), relationships=tuple(relationships))


def parse_dashboard_spec(document: str | bytes | dict) -> DashboardSpec:
    """Parse and validate a dashboard spec document.

    Accepts the JSON text or an already-decoded object. All structural
    invariants are checked; inferred sub-region geometry is NOT filled in
    here (see :func:`vizguide.subregions.infer_sub_regions`).

    Raises SchemaError, DanglingRefError, or GeometryError.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaError("$", f"not valid JSON: {exc}") from None
    data = _expect_dict(document, "$")

    page_bounds = _rect(_req(data, "pageBounds", "$"), "$.pageBounds")
    if page_bounds.w <= 0 or page_bounds.h <= 0:
        raise GeometryError("pageBounds must have positive width and height")

    visuals = tuple(
        _visual(raw, f"$.visuals[{i}]")
        for i, raw in enumerate(_expect_list(_req(data, "visuals", "$"), "$.visuals"))
    )
    data_model = _data_model(_req(data, "dataModel", "$"), "$.dataModel")
    insights = tuple(
        InsightAnnotation(
            visual_id=_req_str(_expect_dict(raw, f"$.insights[{i}]"), "visualId", f"$.insights[{i}]"),
            kind=_enum(InsightKind, _req(_expect_dict(raw, f"$.insights[{i}]"), "kind", f"$.insights[{i}]"), f"$.insights[{i}].kind"),
            text=_req_str(raw, "text", f"$.insights[{i}]"),
        )
        for i, raw in enumerate(_expect_list(data.get("insights", []), "$.insights"))
    )

    spec = DashboardSpec(
        id=_req_str(data, "id", "$"),
        title=_req_str(data, "title", "$"),
        description=_opt_str(data, "description", "$"),
        page_bounds=page_bounds,
        visuals=visuals,
        data_model=data_model,
        insights=insights,
    )
    _validate(spec)
    return spec


def _validate(spec: DashboardSpec) -> None:
    seen_ids: set[str] = set()
    for v in spec.visuals:
        if v.id in seen_ids:
            raise SchemaError(f"$.visuals[{v.id}].id", "duplicate visual id")
        seen_ids.add(v.id)

        if v.bounds.w <= 0 or v.bounds.h <= 0:
            raise GeometryError(f"visual {v.id}: bounds must have positive width and height")
        if not spec.page_bounds.contains_rect(v.bounds):
            raise GeometryError(f"visual {v.id}: bounds fall outside the page")

        for ref in v.encodings.field_refs():
            if spec.data_model.resolve(ref) is None:
                raise DanglingRefError(f"visual {v.id}: field {ref} not found in data model")
        for axis_name, axis in (("axisX", v.encodings.axis_x), ("axisY", v.encodings.axis_y)):
            if axis and axis.sub_bounds and not v.bounds.contains_rect(axis.sub_bounds):
                raise GeometryError(f"visual {v.id}: {axis_name}.subBounds outside visual bounds")
        legend = v.encodings.legend
        if legend and legend.sub_bounds and not v.bounds.contains_rect(legend.sub_bounds):
            raise GeometryError(f"visual {v.id}: legend.subBounds outside visual bounds")

        if v.kind is VisualKind.KPI:
            if v.encodings.axis_x or v.encodings.axis_y or v.encodings.legend:
                raise SchemaError(f"$.visuals[{v.id}].encodings", "kpi visuals carry no axes or legend")
        if v.kind is VisualKind.SLICER:
            bound_fields = [f for f in (v.encodings.category, v.encodings.value) if f]
            if v.encodings.axis_x or v.encodings.axis_y or v.encodings.legend:
                raise SchemaError(f"$.visuals[{v.id}].encodings", "slicer visuals carry only a bound field")
            if len(bound_fields) != 1:
                raise SchemaError(f"$.visuals[{v.id}].encodings", "slicer needs exactly one bound field")

        caps = v.interactions
        for target in caps.cross_filter_targets:
            if target == v.id:
                raise DanglingRefError(f"visual {v.id}: cross-filter target references its owner")
            if target not in {vv.id for vv in spec.visuals}:
                raise DanglingRefError(f"visual {v.id}: cross-filter target {target!r} does not exist")
        if caps.drill_down:
            if len(caps.drill_hierarchy) < 2:
                raise SchemaError(
                    f"$.visuals[{v.id}].interactions.drillHierarchy",
                    "drill-down requires a hierarchy of at least two fields",
                )
            for ref in caps.drill_hierarchy:
                if spec.data_model.resolve(ref) is None:
                    raise DanglingRefError(f"visual {v.id}: drill field {ref} not found in data model")
        elif caps.drill_hierarchy:
            raise SchemaError(
                f"$.visuals[{v.id}].interactions.drillHierarchy",
                "drillHierarchy given but drillDown is false",
            )

        for region in v.regions:
            if region is not RegionKind.VISUAL_BODY and region not in KIND_REGIONS[v.kind]:
                raise SchemaError(f"$.visuals[{v.id}].regions", f"region {region.value} invalid for kind {v.kind.value}")

    related_tables: set[str] = set()
    for rel in spec.data_model.relationships:
        for ref in (rel.from_ref, rel.to_ref):
            if spec.data_model.resolve(ref) is None:
                raise DanglingRefError(f"relationship endpoint {ref} does not exist")
        related_tables.update({rel.from_ref.table, rel.to_ref.table})
    for table_name in related_tables:
        table = spec.data_model.table(table_name)
        assert table is not None  # resolved above
        if not any(c.role is ColumnRole.KEY for c in table.columns):
            raise SchemaError(f"$.dataModel.tables[{table_name}]", "related table needs at least one key column")

    for i, annotation in enumerate(spec.insights):
        target = spec.visual(annotation.visual_id)
        if target is None:
            raise DanglingRefError(f"insight[{i}] references unknown visual {annotation.visual_id!r}")
        if target.kind is VisualKind.SLICER:
            raise SchemaError(f"$.insights[{i}]", "slicer visuals carry no insight annotations")


# ---------------------------------------------------------------------------
# Serialization (inverse of parsing)
# ---------------------------------------------------------------------------


def _axis_doc(axis: AxisSpec) -> dict:
    doc: dict[str, Any] = {
        "field": {"table": axis.field.table, "column": axis.field.column},
        "scaleType": axis.scale_type.value,
        "unit": axis.unit,
        "label": axis.label,
    }
    if axis.sub_bounds:
        doc["subBounds"] = axis.sub_bounds.to_dict()
    return doc


def serialize_dashboard_spec(spec: DashboardSpec) -> dict:
    """Document form of a spec; parse(serialize(spec)) is structurally identical."""
    visuals = []
    for v in spec.visuals:
        enc: dict[str, Any] = {}
        if v.encodings.axis_x:
            enc["axisX"] = _axis_doc(v.encodings.axis_x)
        if v.encodings.axis_y:
            enc["axisY"] = _axis_doc(v.encodings.axis_y)
        if v.encodings.legend:
            legend = v.encodings.legend
            enc["legend"] = {
                "field": {"table": legend.field.table, "column": legend.field.column},
                "position": legend.position.value,
                "entries": list(legend.entries),
            }
            if legend.sub_bounds:
                enc["legend"]["subBounds"] = legend.sub_bounds.to_dict()
        if v.encodings.category:
            enc["category"] = {"table": v.encodings.category.table, "column": v.encodings.category.column}
        if v.encodings.value:
            enc["value"] = {"table": v.encodings.value.table, "column": v.encodings.value.column}

        doc: dict[str, Any] = {
            "id": v.id,
            "kind": v.kind.value,
            "title": v.title,
            "bounds": v.bounds.to_dict(),
            "encodings": enc,
            "interactions": {
                "selfInteractions": sorted(s.value for s in v.interactions.self_interactions),
                "crossFilterTargets": list(v.interactions.cross_filter_targets),
                "drillDown": v.interactions.drill_down,
                "drillHierarchy": [
                    {"table": f.table, "column": f.column} for f in v.interactions.drill_hierarchy
                ],
            },
            "description": v.description,
        }
        if v.sample_data is not None:
            doc["sampleData"] = v.sample_data
        if v.regions:
            doc["regions"] = {region.value: rect.to_dict() for region, rect in v.regions.items()}
        visuals.append(doc)

    return {
        "id": spec.id,
        "title": spec.title,
        "description": spec.description,
        "pageBounds": spec.page_bounds.to_dict(),
        "visuals": visuals,
        "dataModel": {
            "tables": [
                {
                    "name": t.name,
                    "columns": [
                        {"name": c.name, "valueType": c.value_type.value, "role": c.role.value}
                        for c in t.columns
                    ],
                }
                for t in spec.data_model.tables
            ],
            "relationships": [
                {
                    "from": {"table": r.from_ref.table, "column": r.from_ref.column},
                    "to": {"table": r.to_ref.table, "column": r.to_ref.column},
                }
                for r in spec.data_model.relationships
            ],
        },
        "insights": [
            {"visualId": a.visual_id, "kind": a.kind.value, "text": a.text} for a in spec.insights
        ],
    }


def with_visual(spec: DashboardSpec, visual: VisualSpec) -> DashboardSpec:
    """Copy of the spec with one visual replaced (matched by id)."""
    return replace(
        spec,
        visuals=tuple(visual if v.id == visual.id else v for v in spec.visuals),
    )
