"""Key-establishment, relay and entity-authentication protocols."""
