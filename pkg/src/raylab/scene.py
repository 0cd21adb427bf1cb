"""Scene graph: a tree of entities holding per-instance data, flattened
into TLAS instances each frame.

Entities are concrete structs, not an ECS. Ids are stable for the lifetime
of the scene; sibling names must be unique so entity paths are unique
scene-wide. Material overrides are per-entity and do not propagate to
children.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import accel, geometry
from .errors import (DuplicateIdError, DuplicateNameError, UnknownEntityError,
                     UnknownMaterialError)

ROOT_ID = 0
DEFAULT_MATERIAL = "default"


@dataclass
class MeshRef:
    """A mesh plus the stable key used to share its BLAS between instances."""

    key: str
    mesh: accel.Mesh


@dataclass
class Entity:
    name: str
    local_transform: np.ndarray = field(default_factory=geometry.identity)
    mesh: MeshRef | None = None
    material_name: str | None = None
    ui_flag: bool = False
    children: list = field(default_factory=list)
    entity_id: int | None = None
    parent_id: int | None = None


class Scene:
    def __init__(self):
        self._entities: dict[int, Entity] = {}
        self._next_id = ROOT_ID
        root = Entity("root")
        root.entity_id = self._alloc_id()
        self._entities[root.entity_id] = root

    def _alloc_id(self) -> int:
        i = self._next_id
        self._next_id += 1
        return i

    @property
    def root(self) -> Entity:
        return self._entities[ROOT_ID]

    def entity(self, entity_id: int) -> Entity:
        try:
            return self._entities[entity_id]
        except KeyError:
            raise UnknownEntityError(f"unknown entity id {entity_id}") from None

    def add_child(self, parent_id: int, entity: Entity) -> int:
        """Attach a detached entity (and its subtree); returns its id."""
        parent = self.entity(parent_id)
        if entity.entity_id is not None:
            raise DuplicateIdError(
                f"entity {entity.name!r} is already part of a tree")
        if any(c.name == entity.name for c in parent.children):
            raise DuplicateNameError(
                f"sibling name collision: {entity.name!r} under "
                f"{self.entity_path(parent_id)!r}")
        self._register(entity, parent_id)
        parent.children.append(entity)
        return entity.entity_id

    def _register(self, entity: Entity, parent_id: int | None):
        entity.entity_id = self._alloc_id()
        entity.parent_id = parent_id
        self._entities[entity.entity_id] = entity
        seen = set()
        for child in entity.children:
            if child.name in seen:
                raise DuplicateNameError(
                    f"sibling name collision: {child.name!r} under {entity.name!r}")
            seen.add(child.name)
            self._register(child, entity.entity_id)

    def reparent(self, entity_id: int, new_parent_id: int) -> None:
        ent = self.entity(entity_id)
        if entity_id == ROOT_ID:
            raise UnknownEntityError("cannot reparent the root")
        new_parent = self.entity(new_parent_id)
        if any(c.name == ent.name for c in new_parent.children):
            raise DuplicateNameError(
                f"sibling name collision: {ent.name!r} under "
                f"{self.entity_path(new_parent_id)!r}")
        old_parent = self.entity(ent.parent_id)
        old_parent.children.remove(ent)
        new_parent.children.append(ent)
        ent.parent_id = new_parent_id

    def world_transform(self, entity_id: int) -> np.ndarray:
        """Composition of ancestor local transforms, root first."""
        chain = []
        ent = self.entity(entity_id)
        while ent is not None:
            chain.append(ent.local_transform)
            ent = self._entities[ent.parent_id] if ent.parent_id is not None else None
        m = geometry.identity()
        for local in reversed(chain):
            m = geometry.compose(m, local)
        return m

    def entity_path(self, entity_id: int) -> str:
        parts = []
        ent = self.entity(entity_id)
        while ent is not None:
            parts.append(ent.name)
            ent = self._entities[ent.parent_id] if ent.parent_id is not None else None
        return "/".join(reversed(parts))

    def set_material_override(self, entity_id: int, material_name: str) -> None:
        """Per-entity binding; does not propagate to children. Takes effect
        at the next collect_instances (i.e. between dispatches)."""
        self.entity(entity_id).material_name = material_name

    def walk(self):
        """Depth-first preorder (the deterministic instance order)."""
        stack = [self.root]
        while stack:
            ent = stack.pop()
            yield ent
            stack.extend(reversed(ent.children))

    def collect_instances(self, material_map: dict) -> list:
        """One TLAS instance per entity with a mesh, depth-first order.

        hit_group_id comes from the material kind, the mask from ui_flag,
        debug_name is the entity path."""
        instances = []
        for ent in self.walk():
            if ent.mesh is None:
                continue
            name = ent.material_name or DEFAULT_MATERIAL
            mat = material_map.get(name)
            if mat is None:
                raise UnknownMaterialError(
                    f"entity {self.entity_path(ent.entity_id)!r} references "
                    f"unknown material {name!r}")
            instances.append(accel.Instance(
                blas_id=ent.mesh.key,
                transform=self.world_transform(ent.entity_id),
                instance_id=ent.entity_id,
                hit_group_id=mat.hit_group_id,
                mask=accel.UI_BIT if ent.ui_flag else accel.WORLD_BIT,
                debug_name=self.entity_path(ent.entity_id)))
        return instances

    def material_for_instance(self, instance: accel.Instance, material_map: dict):
        ent = self.entity(instance.instance_id)
        return material_map[ent.material_name or DEFAULT_MATERIAL]

    def mesh_store(self) -> dict:
        """mesh key -> Mesh for every mesh referenced by the tree."""
        store = {}
        for ent in self.walk():
            if ent.mesh is not None:
                store[ent.mesh.key] = ent.mesh.mesh
        return store
