from pydantic import BaseModel


class Model(BaseModel):
    """Base configuration for immutable domain model classes."""

    class Config:
        arbitrary_types_allowed = True
        frozen = True


class Service:
    """Base for services exposed through the `Client`."""

    __slots__ = ("__weakref__",)
