# Инициализационный файл для пакета schemas
# Пустой файл нужен для корректного импорта модулей 