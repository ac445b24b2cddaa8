"""Per-visual help menus: category pruning, node trees, narrative text.

Menus decompose a visual bottom-up into explainable parts and group them
under four top-level categories (read, data, interact, insight). The
structure is fully deterministic; only the phrasing of node narratives
may optionally be polished by a language model, guarded so the polish can
never drop the facts the template contained.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import GatewayError
from .model import (
    AxisSpec,
    DashboardSpec,
    FieldRef,
    InsightKind,
    RegionKind,
    ScaleType,
    VisualKind,
    VisualSpec,
)

logger = logging.getLogger(__name__)


class MenuCategory(str, Enum):
    READ = "read"
    DATA = "data"
    INTERACT = "interact"
    INSIGHT = "insight"


CATEGORY_ORDER = (MenuCategory.READ, MenuCategory.DATA, MenuCategory.INTERACT, MenuCategory.INSIGHT)


class IconToken(str, Enum):
    AXIS = "axis"
    LEGEND = "legend"
    TITLE = "title"
    MARKS = "marks"
    TABLE = "table"
    COLUMN = "column"
    KEY = "key"
    FILTER = "filter"
    INTERACT = "interact"
    DRILL = "drill"
    TREND = "trend"
    DRIVER = "driver"
    INFO = "info"


@dataclass(frozen=True)
class ComponentNode:
    id: str
    category: MenuCategory
    label: str
    narrative: str
    icon: IconToken
    parent_id: str | None = None
    source_region: RegionKind | None = None
    # Tokens the narrative must keep through any rephrasing: units, field
    # names, numbers. Used by the grounding guard in narrate().
    key_tokens: tuple[str, ...] = ()


@dataclass(frozen=True)
class HelpMenuModel:
    visual_id: str
    categories: tuple[MenuCategory, ...]
    nodes: tuple[ComponentNode, ...]
    opened_at: MenuCategory | None = None
    info_text: str = ""

    def children(self, parent_id: str | None) -> tuple[ComponentNode, ...]:
        return tuple(n for n in self.nodes if n.parent_id == parent_id)

    def node(self, node_id: str) -> ComponentNode | None:
        for n in self.nodes:
            if n.id == node_id:
                return n
        return None


def prune_categories(kind: VisualKind) -> frozenset[MenuCategory]:
    """Categories that make sense for a visual kind.

    KPI cards support no direct interaction, so interact is hidden; filter
    visuals encode no findings of their own, so insight is suppressed.
    Read and data always survive.
    """
    if kind is VisualKind.KPI:
        return frozenset({MenuCategory.READ, MenuCategory.DATA, MenuCategory.INSIGHT})
    if kind is VisualKind.SLICER:
        return frozenset({MenuCategory.READ, MenuCategory.DATA, MenuCategory.INTERACT})
    return frozenset(CATEGORY_ORDER)


_REGION_CATEGORY = {
    RegionKind.AXIS_X: MenuCategory.READ,
    RegionKind.AXIS_Y: MenuCategory.READ,
    RegionKind.LEGEND: MenuCategory.READ,
    RegionKind.TITLE: MenuCategory.READ,
    RegionKind.VISUAL_BODY: MenuCategory.READ,
    RegionKind.DATA_AREA: MenuCategory.INSIGHT,
    RegionKind.FILTER_CONTROL: MenuCategory.INTERACT,
}


def region_to_category(region: RegionKind, kind: VisualKind) -> MenuCategory:
    """Menu category a selected region should open; falls back to read
    when pruning removed the mapped category."""
    category = _REGION_CATEGORY[region]
    if category not in prune_categories(kind):
        return MenuCategory.READ
    return category


# ---------------------------------------------------------------------------
# Narrative templates
# ---------------------------------------------------------------------------

_SCALE_PHRASES = {
    ScaleType.LINEAR: "on a continuous scale",
    ScaleType.LOG: "on a logarithmic scale",
    ScaleType.CATEGORICAL: "as categories",
    ScaleType.TEMPORAL: "in time order",
}

_POSITION_PHRASES = {
    "top": "along the top",
    "bottom": "along the bottom",
    "left": "down the left side",
    "right": "down the right side",
    "topRight": "at the top right",
}


def _axis_narrative(axis_name: str, axis: AxisSpec) -> tuple[str, tuple[str, ...]]:
    tokens: list[str] = [axis.field.column]
    if axis.scale_type is ScaleType.CATEGORICAL:
        text = f"The {axis_name} lists {axis.field.column} as categories."
    elif axis.scale_type is ScaleType.TEMPORAL:
        text = f"The {axis_name} orders {axis.field.column} in time order."
    elif axis.unit:
        text = f"The {axis_name} represents values in {axis.unit} {_SCALE_PHRASES[axis.scale_type]}."
        tokens.append(axis.unit)
    else:
        text = f"The {axis_name} represents {axis.field.column} values {_SCALE_PHRASES[axis.scale_type]}."
    return text, tuple(tokens)


_CATEGORY_BLURBS = {
    MenuCategory.READ: "How to read this visual: its title, axes, legend, and marks.",
    MenuCategory.DATA: "Where the numbers come from: tables, columns, keys, and measures.",
    MenuCategory.INTERACT: "What you can do here and how it affects the rest of the dashboard.",
    MenuCategory.INSIGHT: "What the author points out about this visual.",
}

_SELF_INTERACTION_TEXT = {
    "highlightCategory": ("Highlight", "Click a mark to highlight its category across the visual."),
    "compareCategories": ("Compare", "Ctrl-click several marks to compare their categories side by side."),
    "hover": ("Hover details", "Hold the pointer over a mark to reveal a detail tooltip."),
}


def _build_visual_menu(visual: VisualSpec, spec: DashboardSpec) -> HelpMenuModel:
    categories = tuple(c for c in CATEGORY_ORDER if c in prune_categories(visual.kind))
    nodes: list[ComponentNode] = []

    def add(node: ComponentNode) -> None:
        nodes.append(node)

    for category in categories:
        add(
            ComponentNode(
                id=f"{visual.id}.{category.value}",
                category=category,
                label=category.value.capitalize(),
                narrative=_CATEGORY_BLURBS[category],
                icon=IconToken.INFO,
            )
        )

    # -- read ---------------------------------------------------------------
    read_root = f"{visual.id}.read"
    add(
        ComponentNode(
            id=f"{read_root}.title",
            category=MenuCategory.READ,
            parent_id=read_root,
            label="Title",
            narrative=f'The title "{visual.title}" states what this visual shows.',
            icon=IconToken.TITLE,
            source_region=RegionKind.TITLE if RegionKind.TITLE in visual.regions else None,
            key_tokens=(visual.title,),
        )
    )
    enc = visual.encodings
    if enc.axis_x:
        text, tokens = _axis_narrative("X-axis", enc.axis_x)
        add(
            ComponentNode(
                id=f"{read_root}.axis-x",
                category=MenuCategory.READ,
                parent_id=read_root,
                label=enc.axis_x.label or enc.axis_x.field.column,
                narrative=text,
                icon=IconToken.AXIS,
                source_region=RegionKind.AXIS_X,
                key_tokens=tokens,
            )
        )
    if enc.axis_y:
        text, tokens = _axis_narrative("Y-axis", enc.axis_y)
        add(
            ComponentNode(
                id=f"{read_root}.axis-y",
                category=MenuCategory.READ,
                parent_id=read_root,
                label=enc.axis_y.label or enc.axis_y.field.column,
                narrative=text,
                icon=IconToken.AXIS,
                source_region=RegionKind.AXIS_Y,
                key_tokens=tokens,
            )
        )
    if enc.legend:
        entries = ", ".join(enc.legend.entries)
        add(
            ComponentNode(
                id=f"{read_root}.legend",
                category=MenuCategory.READ,
                parent_id=read_root,
                label="Legend",
                narrative=(
                    f"The legend maps colors to {enc.legend.field.column}; entries read in order: "
                    f"{entries}. It sits {_POSITION_PHRASES[enc.legend.position.value]}."
                ),
                icon=IconToken.LEGEND,
                source_region=RegionKind.LEGEND,
                key_tokens=(enc.legend.field.column, *enc.legend.entries),
            )
        )
    if enc.category:
        add(
            ComponentNode(
                id=f"{read_root}.category",
                category=MenuCategory.READ,
                parent_id=read_root,
                label="Grouping",
                narrative=f"Marks are grouped by {enc.category.column}.",
                icon=IconToken.MARKS,
                source_region=RegionKind.DATA_AREA if RegionKind.DATA_AREA in visual.regions else None,
                key_tokens=(enc.category.column,),
            )
        )
    if enc.value:
        add(
            ComponentNode(
                id=f"{read_root}.value",
                category=MenuCategory.READ,
                parent_id=read_root,
                label="Value",
                narrative=f"Each mark sizes by {enc.value.column}.",
                icon=IconToken.MARKS,
                source_region=RegionKind.DATA_AREA if RegionKind.DATA_AREA in visual.regions else None,
                key_tokens=(enc.value.column,),
            )
        )

    # -- data ---------------------------------------------------------------
    data_root = f"{visual.id}.data"
    seen_refs: list[FieldRef] = []
    for ref in enc.field_refs():
        if ref not in seen_refs:
            seen_refs.append(ref)
    tables = []
    for ref in seen_refs:
        if ref.table not in tables:
            tables.append(ref.table)
    for table_name in tables:
        add(
            ComponentNode(
                id=f"{data_root}.table-{table_name}",
                category=MenuCategory.DATA,
                parent_id=data_root,
                label=table_name,
                narrative=f'Table "{table_name}" supplies this visual.',
                icon=IconToken.TABLE,
                key_tokens=(table_name,),
            )
        )
    for ref in seen_refs:
        column = spec.data_model.resolve(ref)
        role = column.role.value if column else "unknown"
        vtype = column.value_type.value if column else "unknown"
        add(
            ComponentNode(
                id=f"{data_root}.col-{ref.table}-{ref.column}",
                category=MenuCategory.DATA,
                parent_id=f"{data_root}.table-{ref.table}",
                label=ref.column,
                narrative=f'Column "{ref.column}" in table "{ref.table}" plays the {role} role and holds {vtype} values.',
                icon=IconToken.KEY if role == "key" else IconToken.COLUMN,
                key_tokens=(ref.table, ref.column),
            )
        )
    for table_name in tables:
        table = spec.data_model.table(table_name)
        if table is None:
            continue
        for col in table.columns:
            ref = FieldRef(table_name, col.name)
            if col.role.value == "key" and ref not in seen_refs:
                add(
                    ComponentNode(
                        id=f"{data_root}.key-{table_name}-{col.name}",
                        category=MenuCategory.DATA,
                        parent_id=f"{data_root}.table-{table_name}",
                        label=col.name,
                        narrative=f'Column "{col.name}" is the key of table "{table_name}"; rows join on it.',
                        icon=IconToken.KEY,
                        key_tokens=(table_name, col.name),
                    )
                )

    # -- interact -------------------------------------------------------------
    if MenuCategory.INTERACT in prune_categories(visual.kind):
        interact_root = f"{visual.id}.interact"
        caps = visual.interactions
        if visual.kind is VisualKind.SLICER:
            bound = enc.category or enc.value
            add(
                ComponentNode(
                    id=f"{interact_root}.filter",
                    category=MenuCategory.INTERACT,
                    parent_id=interact_root,
                    label="Filter",
                    narrative=f"Pick a range of {bound.column} here to narrow the linked visuals." if bound else "Pick a range here to narrow the linked visuals.",
                    icon=IconToken.FILTER,
                    source_region=RegionKind.FILTER_CONTROL,
                    key_tokens=(bound.column,) if bound else (),
                )
            )
        for interaction in sorted(caps.self_interactions, key=lambda s: s.value):
            label, text = _SELF_INTERACTION_TEXT[interaction.value]
            add(
                ComponentNode(
                    id=f"{interact_root}.self-{interaction.value}",
                    category=MenuCategory.INTERACT,
                    parent_id=interact_root,
                    label=label,
                    narrative=text,
                    icon=IconToken.INTERACT,
                    source_region=RegionKind.DATA_AREA if RegionKind.DATA_AREA in visual.regions else None,
                )
            )
        for target_id in caps.cross_filter_targets:
            target = spec.visual(target_id)
            target_title = target.title if target else target_id
            add(
                ComponentNode(
                    id=f"{interact_root}.xfilter-{target_id}",
                    category=MenuCategory.INTERACT,
                    parent_id=interact_root,
                    label=f"Filters {target_title}",
                    narrative=f'Selecting data here cross-filters "{target_title}".',
                    icon=IconToken.FILTER,
                    key_tokens=(target_title,),
                )
            )
        if caps.drill_down:
            steps = " to ".join(ref.column for ref in caps.drill_hierarchy)
            add(
                ComponentNode(
                    id=f"{interact_root}.drill",
                    category=MenuCategory.INTERACT,
                    parent_id=interact_root,
                    label="Drill down",
                    narrative=(
                        f"Drill down moves from {steps}: turn on the drill control, then click a mark "
                        "to descend one level."
                    ),
                    icon=IconToken.DRILL,
                    source_region=RegionKind.DATA_AREA if RegionKind.DATA_AREA in visual.regions else None,
                    key_tokens=tuple(ref.column for ref in caps.drill_hierarchy),
                )
            )

    # -- insight --------------------------------------------------------------
    if MenuCategory.INSIGHT in prune_categories(visual.kind):
        insight_root = f"{visual.id}.insight"
        icon_for = {
            InsightKind.TREND: IconToken.TREND,
            InsightKind.DRIVER: IconToken.DRIVER,
            InsightKind.DESCRIPTIVE: IconToken.INFO,
        }
        for i, annotation in enumerate(spec.insights_for(visual.id)):
            add(
                ComponentNode(
                    id=f"{insight_root}.note-{i}",
                    category=MenuCategory.INSIGHT,
                    parent_id=insight_root,
                    label=annotation.kind.value.capitalize(),
                    narrative=annotation.text,
                    icon=icon_for[annotation.kind],
                    source_region=RegionKind.DATA_AREA if RegionKind.DATA_AREA in visual.regions else None,
                )
            )

    overview = visual.description or f'"{visual.title}" is a {visual.kind.value} visual.'
    return HelpMenuModel(
        visual_id=visual.id,
        categories=categories,
        nodes=tuple(nodes),
        opened_at=None,
        info_text=overview,
    )


def build_component_graph(spec: DashboardSpec) -> dict[str, HelpMenuModel]:
    """One menu model per visual, keyed by visual id.

    Pure over the spec: equal specs produce structurally equal graphs.
    Expects inferred sub-regions so nodes can point at highlight geometry.
    """
    return {v.id: _build_visual_menu(v, spec) for v in spec.visuals}


def open_menu(
    model: HelpMenuModel,
    kind: VisualKind,
    region: RegionKind | None = None,
) -> HelpMenuModel:
    """Menu opened at the category matching a selected region.

    The info text shows the node linked to the region when there is one,
    otherwise the category blurb.
    """
    if region is None:
        return replace(model, opened_at=None)
    category = region_to_category(region, kind)
    info = _CATEGORY_BLURBS[category]
    for node in model.nodes:
        if node.source_region is region and node.category is category:
            info = node.narrative
            break
    return replace(model, opened_at=category, info_text=info)


# ---------------------------------------------------------------------------
# Narrative polish
# ---------------------------------------------------------------------------


class NarrativeMode(str, Enum):
    TEMPLATE = "template"
    LLM_POLISH = "llmPolish"


_NUMBER_RE = re.compile(r"\d[\d,.]*")


def _grounded(template: str, key_tokens: tuple[str, ...], candidate: str) -> bool:
    """Every key token and numeric token of the template must survive verbatim."""
    required = list(key_tokens) + _NUMBER_RE.findall(template)
    return all(token in candidate for token in required)


def narrate(node: ComponentNode, mode: NarrativeMode = NarrativeMode.TEMPLATE, gateway=None) -> str:
    """Final narrative text for a node.

    Template mode returns the deterministic template. Polish mode asks the
    gateway to rephrase and keeps the reply only if it is still grounded:
    units, field names, and numbers from the template must appear verbatim,
    otherwise the template wins.
    """
    if mode is NarrativeMode.TEMPLATE:
        return node.narrative
    if gateway is None:
        raise ValueError("llmPolish mode requires a gateway")
    try:
        polished = gateway.polish_text(node.narrative)
    except GatewayError as exc:
        logger.warning("narrative polish failed for %s: %s", node.id, exc)
        return node.narrative
    if not isinstance(polished, str) or not _grounded(node.narrative, node.key_tokens, polished):
        logger.warning("narrative polish for %s dropped grounded tokens; using template", node.id)
        return node.narrative
    return polished


def serialize_menu(model: HelpMenuModel) -> dict:
    return {
        "visualId": model.visual_id,
        "categories": [c.value for c in model.categories],
        "openedAt": model.opened_at.value if model.opened_at else None,
        "infoText": model.info_text,
        "nodes": [
            {
                "id": n.id,
                "category": n.category.value,
                "parentId": n.parent_id,
                "label": n.label,
                "narrative": n.narrative,
                "icon": n.icon.value,
                "sourceRegion": n.source_region.value if n.source_region else None,
                "keyTokens": list(n.key_tokens),
            }
            for n in model.nodes
        ],
    }
