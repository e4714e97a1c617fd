# File needed for pytest.
