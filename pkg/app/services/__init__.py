# Инициализационный файл для пакета services
# Пустой файл нужен для корректного импорта модулей 