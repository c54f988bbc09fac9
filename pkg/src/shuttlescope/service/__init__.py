from .app import ServiceConfig, create_app, load_bundles

__all__ = ["ServiceConfig", "create_app", "load_bundles"]
