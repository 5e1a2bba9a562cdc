from .app import create_app
from .store import Session, SessionStore, replay_journal

__all__ = ["create_app", "Session", "SessionStore", "replay_journal"]
