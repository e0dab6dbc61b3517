from demix.main import app

app()
