# tests/integration – integration tests
