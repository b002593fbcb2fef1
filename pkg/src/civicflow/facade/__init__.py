"""Administration surface: HTTP/JSON API and operator CLI."""
